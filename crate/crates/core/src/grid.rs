//! Discretized densities on the reduced simplex: the segment `[0, N]` for two
//! agents and the triangle `{x1, x2 >= 0, x1 + x2 <= N}` for three.
//!
//! Nodes sit at multiples of `h = N / cells`. Boundary nodes never hold
//! continuous density: on the segment the endpoints are sticky atoms; on the
//! triangle the edges carry 1D sub-densities and the corners carry atoms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a triangle node relative to the boundary.
///
/// Edge `k` is the face `x_k = 0` and corner `k` is the point where agent `k`
/// holds everything (all indices zero-based). Edge coordinates: edge 0 uses
/// `x2`, edges 1 and 2 use `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Edge { edge: usize, s: usize },
    Corner(usize),
}

/// Corners at the `s = 0` and `s = cells` ends of each edge.
pub const EDGE_END_CORNERS: [[usize; 2]; 3] = [[2, 1], [2, 0], [1, 0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub total: f64,
    pub cells: usize,
    /// Density at nodes `0..=cells`; the endpoints stay zero.
    pub density: Vec<f64>,
    /// Sticky masses at `x1 = 0` and `x1 = N`.
    pub atoms: [f64; 2],
    pub time: f64,
}

impl LineGrid {
    pub fn zeros(total: f64, cells: usize, time: f64) -> Self {
        Self {
            total,
            cells,
            density: vec![0.0; cells + 1],
            atoms: [0.0; 2],
            time,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.total / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Per-node masses: atoms at both ends, `f * h` inside.
    pub fn node_masses(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut m: Vec<f64> = self.density.iter().map(|f| f * h).collect();
        m[0] = self.atoms[0];
        m[self.cells] = self.atoms[1];
        m
    }

    pub fn from_node_masses(total: f64, masses: &[f64], time: f64) -> Self {
        let cells = masses.len() - 1;
        let h = total / cells as f64;
        let mut density: Vec<f64> = masses.iter().map(|m| m / h).collect();
        density[0] = 0.0;
        density[cells] = 0.0;
        Self {
            total,
            cells,
            density,
            atoms: [masses[0], masses[cells]],
            time,
        }
    }

    pub fn interior_mass(&self) -> f64 {
        self.density[1..self.cells].iter().sum::<f64>() * self.spacing()
    }

    pub fn total_mass(&self) -> f64 {
        self.interior_mass() + self.atoms[0] + self.atoms[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleGrid {
    pub total: f64,
    pub cells: usize,
    /// Interior density on the triangular node array (see [`TriangleGrid::index`]).
    pub density: Vec<f64>,
    /// 1D densities along each edge at nodes `0..=cells`; ends stay zero.
    pub edges: [Vec<f64>; 3],
    pub corners: [f64; 3],
    pub time: f64,
}

pub fn triangle_nodes(cells: usize) -> usize {
    (cells + 1) * (cells + 2) / 2
}

impl TriangleGrid {
    pub fn zeros(total: f64, cells: usize, time: f64) -> Self {
        Self {
            total,
            cells,
            density: vec![0.0; triangle_nodes(cells)],
            edges: [
                vec![0.0; cells + 1],
                vec![0.0; cells + 1],
                vec![0.0; cells + 1],
            ],
            corners: [0.0; 3],
            time,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.total / self.cells as f64
    }

    /// Row-major index of node `(i, j)` = `(x1 / h, x2 / h)`, `i + j <= cells`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        node_index(self.cells, i, j)
    }

    pub fn classify(&self, i: usize, j: usize) -> NodeClass {
        classify_node(self.cells, i, j)
    }

    /// Node `(i, j)` of position `s` on `edge`.
    pub fn edge_node(&self, edge: usize, s: usize) -> (usize, usize) {
        edge_node(self.cells, edge, s)
    }

    pub fn corner_node(&self, corner: usize) -> (usize, usize) {
        match corner {
            0 => (self.cells, 0),
            1 => (0, self.cells),
            _ => (0, 0),
        }
    }

    /// Iterates `(i, j)` over every node.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> {
        let m = self.cells;
        (0..=m).flat_map(move |i| (0..=m - i).map(move |j| (i, j)))
    }

    pub fn node_masses(&self) -> Vec<f64> {
        let h = self.spacing();
        self.nodes()
            .map(|(i, j)| match self.classify(i, j) {
                NodeClass::Interior => self.density[self.index(i, j)] * h * h,
                NodeClass::Edge { edge, s } => self.edges[edge][s] * h,
                NodeClass::Corner(k) => self.corners[k],
            })
            .collect()
    }

    pub fn from_node_masses(total: f64, cells: usize, masses: &[f64], time: f64) -> Self {
        let mut grid = Self::zeros(total, cells, time);
        let h = grid.spacing();
        let nodes: Vec<(usize, usize)> = grid.nodes().collect();
        for ((i, j), &m) in nodes.into_iter().zip(masses) {
            match grid.classify(i, j) {
                NodeClass::Interior => {
                    let idx = grid.index(i, j);
                    grid.density[idx] = m / (h * h);
                }
                NodeClass::Edge { edge, s } => grid.edges[edge][s] = m / h,
                NodeClass::Corner(k) => grid.corners[k] = m,
            }
        }
        grid
    }

    pub fn interior_mass(&self) -> f64 {
        let h = self.spacing();
        self.density.iter().sum::<f64>() * h * h
    }

    pub fn edge_masses(&self) -> [f64; 3] {
        let h = self.spacing();
        [0, 1, 2].map(|k| self.edges[k].iter().sum::<f64>() * h)
    }

    pub fn total_mass(&self) -> f64 {
        self.interior_mass() + self.edge_masses().iter().sum::<f64>() + self.corners.iter().sum::<f64>()
    }
}

pub fn node_index(cells: usize, i: usize, j: usize) -> usize {
    // row i holds cells + 1 - i nodes
    i * (cells + 1) - i * i.saturating_sub(1) / 2 + j
}

pub fn classify_node(cells: usize, i: usize, j: usize) -> NodeClass {
    match (i, j) {
        (0, 0) => NodeClass::Corner(2),
        (0, j) if j == cells => NodeClass::Corner(1),
        (i, 0) if i == cells => NodeClass::Corner(0),
        (0, j) => NodeClass::Edge { edge: 0, s: j },
        (i, 0) => NodeClass::Edge { edge: 1, s: i },
        (i, j) if i + j == cells => NodeClass::Edge { edge: 2, s: i },
        _ => NodeClass::Interior,
    }
}

pub fn edge_node(cells: usize, edge: usize, s: usize) -> (usize, usize) {
    match edge {
        0 => (0, s),
        1 => (s, 0),
        _ => (s, cells - s),
    }
}

/// Either discretized density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityGrid {
    Line(LineGrid),
    Triangle(TriangleGrid),
}

impl DensityGrid {
    pub fn total(&self) -> f64 {
        match self {
            Self::Line(g) => g.total,
            Self::Triangle(g) => g.total,
        }
    }

    pub fn cells(&self) -> usize {
        match self {
            Self::Line(g) => g.cells,
            Self::Triangle(g) => g.cells,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Self::Line(g) => g.time,
            Self::Triangle(g) => g.time,
        }
    }

    pub fn node_masses(&self) -> Vec<f64> {
        match self {
            Self::Line(g) => g.node_masses(),
            Self::Triangle(g) => g.node_masses(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Line(g) => g.total_mass(),
            Self::Triangle(g) => g.total_mass(),
        }
    }

    /// Node coordinates in the same order as [`DensityGrid::node_masses`].
    pub fn node_coordinates(&self) -> Vec<Vec<f64>> {
        match self {
            Self::Line(g) => (0..=g.cells).map(|i| vec![g.node(i)]).collect(),
            Self::Triangle(g) => {
                let h = g.spacing();
                g.nodes()
                    .map(|(i, j)| vec![i as f64 * h, j as f64 * h])
                    .collect()
            }
        }
    }

    /// Indices (into node order) of boundary nodes holding atoms or edge mass.
    pub fn is_boundary_node(&self) -> Vec<bool> {
        match self {
            Self::Line(g) => (0..=g.cells).map(|i| i == 0 || i == g.cells).collect(),
            Self::Triangle(g) => g
                .nodes()
                .map(|(i, j)| g.classify(i, j) != NodeClass::Interior)
                .collect(),
        }
    }

    /// Aggregates onto a grid `ratio` times coarser. Boundary mass stays on
    /// the boundary and interior mass stays inside; on the segment a fine node
    /// exactly between two coarse nodes is split evenly.
    pub fn coarsen(&self, ratio: usize) -> Result<DensityGrid> {
        if ratio == 0 || !self.cells().is_multiple_of(ratio) {
            return Err(Error::IncompatibleDomains(format!(
                "cannot coarsen {} cells by {ratio}",
                self.cells()
            )));
        }
        if ratio == 1 {
            return Ok(self.clone());
        }
        let coarse = self.cells() / ratio;
        match self {
            Self::Line(g) => {
                let fine = g.node_masses();
                let mut out = vec![0.0; coarse + 1];
                out[0] = fine[0];
                out[coarse] = fine[g.cells];
                for (i, &m) in fine.iter().enumerate().take(g.cells).skip(1) {
                    for (target, share) in interior_targets(i, ratio, coarse) {
                        out[target] += share * m;
                    }
                }
                Ok(Self::Line(LineGrid::from_node_masses(g.total, &out, g.time)))
            }
            Self::Triangle(g) => {
                let fine = g.node_masses();
                let mut out = TriangleGrid::zeros(g.total, coarse, g.time);
                let mut masses = vec![0.0; triangle_nodes(coarse)];
                for ((i, j), m) in g.nodes().zip(fine) {
                    let (ci, cj) = match g.classify(i, j) {
                        NodeClass::Corner(k) => out.corner_node(k),
                        NodeClass::Edge { edge, s } => {
                            for (target, share) in interior_targets(s, ratio, coarse) {
                                let (a, b) = out.edge_node(edge, target);
                                masses[out.index(a, b)] += share * m;
                            }
                            continue;
                        }
                        NodeClass::Interior => {
                            let mut ci = ((i as f64) / ratio as f64).round().max(1.0) as usize;
                            let mut cj = ((j as f64) / ratio as f64).round().max(1.0) as usize;
                            while ci + cj > coarse - 1 {
                                if ci >= cj {
                                    ci -= 1;
                                } else {
                                    cj -= 1;
                                }
                            }
                            (ci, cj)
                        }
                    };
                    masses[out.index(ci, cj)] += m;
                }
                out = TriangleGrid::from_node_masses(g.total, coarse, &masses, g.time);
                Ok(Self::Triangle(out))
            }
        }
    }
}

// Coarse interior targets (1..coarse-1) for fine interior node `i`.
fn interior_targets(i: usize, ratio: usize, coarse: usize) -> Vec<(usize, f64)> {
    let clamp = |c: usize| c.clamp(1, coarse.saturating_sub(1).max(1));
    let q = i / ratio;
    let r = i % ratio;
    if 2 * r == ratio {
        vec![(clamp(q), 0.5), (clamp(q + 1), 0.5)]
    } else if 2 * r < ratio {
        vec![(clamp(q), 1.0)]
    } else {
        vec![(clamp(q + 1), 1.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_indexing_is_dense() {
        let g = TriangleGrid::zeros(10.0, 5, 0.0);
        let idx: Vec<usize> = g.nodes().map(|(i, j)| g.index(i, j)).collect();
        assert_eq!(idx, (0..triangle_nodes(5)).collect::<Vec<_>>());
    }

    #[test]
    fn triangle_classes() {
        let g = TriangleGrid::zeros(10.0, 4, 0.0);
        assert_eq!(g.classify(0, 0), NodeClass::Corner(2));
        assert_eq!(g.classify(4, 0), NodeClass::Corner(0));
        assert_eq!(g.classify(0, 4), NodeClass::Corner(1));
        assert_eq!(g.classify(0, 2), NodeClass::Edge { edge: 0, s: 2 });
        assert_eq!(g.classify(3, 0), NodeClass::Edge { edge: 1, s: 3 });
        assert_eq!(g.classify(1, 3), NodeClass::Edge { edge: 2, s: 1 });
        assert_eq!(g.classify(1, 2), NodeClass::Interior);
        for (edge, ends) in EDGE_END_CORNERS.iter().enumerate() {
            assert_eq!(g.classify(g.edge_node(edge, 0).0, g.edge_node(edge, 0).1), NodeClass::Corner(ends[0]));
            let (a, b) = g.edge_node(edge, 4);
            assert_eq!(g.classify(a, b), NodeClass::Corner(ends[1]));
        }
    }

    #[test]
    fn line_coarsening_splits_midpoints() {
        let masses = vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.0, 0.1];
        let g = DensityGrid::Line(LineGrid::from_node_masses(6.0, &masses, 0.0));
        let c = g.coarsen(2).unwrap().node_masses();
        // nodes 1 and 5 split, node 3 splits between coarse 1 and 2 (both interior)
        assert_eq!(c.len(), 4);
        assert!((c[0] - 0.1).abs() < 1e-15);
        assert!((c[3] - 0.1).abs() < 1e-15);
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((c[1] - (0.2 + 0.3 + 0.05)).abs() < 1e-12);
        assert!((c[2] - (0.05 + 0.2 + 0.0)).abs() < 1e-12);
    }

    #[test]
    fn triangle_coarsening_keeps_classes() {
        let mut g = TriangleGrid::zeros(8.0, 8, 0.0);
        let i = g.index(1, 1);
        g.density[i] = 1.0;
        g.edges[2][3] = 1.0;
        g.corners[0] = 0.25;
        let c = match DensityGrid::Triangle(g.clone()).coarsen(2).unwrap() {
            DensityGrid::Triangle(c) => c,
            _ => unreachable!(),
        };
        assert!((c.total_mass() - g.total_mass()).abs() < 1e-12);
        assert!((c.interior_mass() - g.interior_mass()).abs() < 1e-12);
        assert_eq!(c.corners[0], 0.25);
        assert!((c.edge_masses()[2] - g.edge_masses()[2]).abs() < 1e-12);
        assert!(DensityGrid::Triangle(g).coarsen(3).is_err());
    }
}
