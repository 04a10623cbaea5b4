use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::line::{cell_bounds, image_solution_1d, ImageSolution1d};
use crate::error::{Error, Result};
use crate::fpe::{symmetric_diffusion, ReducedDiffusion};
use crate::grid::{NodeClass, TriangleGrid, EDGE_END_CORNERS};

/// Quadratic form of the bivariate kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadraticForm {
    /// Covariance `2 D (t - t0)`.
    Derived { diffusion: [[f64; 2]; 2] },
    /// `dx^2 + dy^2 + 4 dx dy` over `16 c (t - t0)`; never evaluates, the
    /// form is indefinite.
    Verbatim { c: f64 },
}

impl QuadraticForm {
    /// Derived form of the symmetric kernel `nu_ij = c`.
    pub fn symmetric(rate: f64) -> Result<Self> {
        match symmetric_diffusion(3, rate)? {
            ReducedDiffusion::Plane(diffusion) => Ok(Self::Derived { diffusion }),
            ReducedDiffusion::Line(_) => unreachable!(),
        }
    }
}

fn eigenvalues(m: [[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let r = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0]).sqrt();
    [mean + r, mean - r]
}

#[derive(Debug, Clone, Copy)]
struct Gauss2 {
    inv: [[f64; 2]; 2],
    norm: f64,
}

impl Gauss2 {
    fn new(diffusion: [[f64; 2]; 2], tau: f64) -> Result<Self> {
        let s = [
            [2.0 * diffusion[0][0] * tau, 2.0 * diffusion[0][1] * tau],
            [2.0 * diffusion[1][0] * tau, 2.0 * diffusion[1][1] * tau],
        ];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if !(det > 0.0 && s[0][0] > 0.0) {
            return Err(Error::InvalidConfig(format!("diffusion {diffusion:?} is not positive definite")));
        }
        Ok(Self {
            inv: [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]],
            norm: 1.0 / (2.0 * PI * det.sqrt()),
        })
    }

    fn eval(&self, dx: f64, dy: f64) -> f64 {
        let q = self.inv[0][0] * dx * dx + 2.0 * self.inv[0][1] * dx * dy + self.inv[1][1] * dy * dy;
        self.norm * (-0.5 * q).exp()
    }
}

/// Free-space bivariate kernel in `(x1, x2)`.
pub fn gaussian_2d(x: [f64; 2], t: f64, x0: [f64; 2], t0: f64, form: &QuadraticForm) -> Result<f64> {
    match *form {
        QuadraticForm::Verbatim { .. } => Err(Error::NonviableForm(eigenvalues([[1.0, 2.0], [2.0, 1.0]]))),
        QuadraticForm::Derived { diffusion } => {
            if t <= t0 {
                return Err(Error::DegenerateTime { t, t0 });
            }
            Ok(Gauss2::new(diffusion, t - t0)?.eval(x[0] - x0[0], x[1] - x0[1]))
        }
    }
}

/// Indicator weights of the boundary piece a start point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWeights {
    /// `w_i`: only `x_i` vanishes.
    pub edges: [f64; 3],
    /// Indexed by the agent holding everything: `w_ij` with `{i, j, k}`
    /// a permutation of the agents lands in `corners[k]`.
    pub corners: [f64; 3],
}

fn zero_tolerance(total: f64) -> f64 {
    1e-12 * total.abs().max(1.0)
}

pub fn boundary_weights(x: [f64; 3]) -> BoundaryWeights {
    let total: f64 = x.iter().sum();
    let tol = zero_tolerance(total);
    let zero: Vec<bool> = x.iter().map(|v| v.abs() <= tol).collect();
    let mut w = BoundaryWeights {
        edges: [0.0; 3],
        corners: [0.0; 3],
    };
    match zero.iter().filter(|&&z| z).count() {
        1 => w.edges[zero.iter().position(|&z| z).unwrap()] = 1.0,
        2 => w.corners[zero.iter().position(|&z| !z).unwrap()] = 1.0,
        _ => {}
    }
    w
}

fn full(x: [f64; 2], total: f64) -> [f64; 3] {
    [x[0], x[1], total - x[0] - x[1]]
}

fn check_simplex(x: [f64; 2], total: f64) -> Result<[f64; 3]> {
    let v = full(x, total);
    let tol = zero_tolerance(total);
    if !(total > 0.0) || v.iter().any(|&c| !(c >= -tol)) {
        return Err(Error::OutOfRange(format!("start {x:?} outside the simplex of total {total}")));
    }
    Ok(v.map(|c| if c.abs() <= tol { 0.0 } else { c }))
}

/// Coordinate along each edge: `x2` on edge 0, `x1` on edges 1 and 2.
fn edge_coordinate(edge: usize, x: [f64; 2]) -> f64 {
    if edge == 0 {
        x[1]
    } else {
        x[0]
    }
}

/// Two-agent sticky solution along one edge of the triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSolution {
    /// Edge `k` is the face `x_k = 0` (zero-based).
    pub edge: usize,
    pub solution: ImageSolution1d,
}

/// The three edge densities with the start projected onto each edge's
/// coordinate (`x2`, `x1`, `x1`) and the two-agent diffusion coefficient.
pub fn edge_solutions(x0: [f64; 2], t: f64, t0: f64, total: f64, rate: f64) -> Result<[EdgeSolution; 3]> {
    let v = check_simplex(x0, total)?;
    if v.contains(&0.0) {
        return Err(Error::OutOfRange(format!("start {x0:?} is not interior")));
    }
    let d = edge_diffusion(rate)?;
    let make = |edge: usize| -> Result<EdgeSolution> {
        Ok(EdgeSolution {
            edge,
            solution: image_solution_1d(edge_coordinate(edge, x0), t, t0, total, d)?,
        })
    };
    Ok([make(0)?, make(1)?, make(2)?])
}

fn edge_diffusion(rate: f64) -> Result<f64> {
    match symmetric_diffusion(2, rate)? {
        ReducedDiffusion::Line(d) => Ok(d),
        ReducedDiffusion::Plane(_) => unreachable!(),
    }
}

type Mat3 = [[i64; 3]; 3];

fn reflection(k: usize) -> Mat3 {
    let mut m = [[0; 3]; 3];
    for (j, row) in m.iter_mut().enumerate() {
        row[j] = 1;
        if j != k {
            row[k] = 1;
        }
    }
    m[k][k] = -1;
    m
}

fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn apply(m: &Mat3, x: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (0..3).map(|k| m[i][k] as f64 * x[k]).sum();
    }
    out
}

/// Signed images of `x0` under the reflection group of the triangle,
/// restricted to alcoves within `reach` of `x0`.
fn kaleidoscope(x0: [f64; 3], total: f64, reach: f64) -> Vec<([f64; 2], f64)> {
    let generators = [reflection(0), reflection(1), reflection(2)];
    let identity: Mat3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let circumradius = total * (2.0f64 / 3.0).sqrt();
    let limit = reach + circumradius;
    let mut seen: HashSet<[i64; 3]> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    seen.insert([1, 1, 1]);
    queue.push_back((identity, 1.0));
    while let Some((w, sign)) = queue.pop_front() {
        let centre = apply(&w, [total / 3.0; 3]);
        let dist = (0..3).map(|i| (centre[i] - x0[i]).powi(2)).sum::<f64>().sqrt();
        if dist > limit {
            continue;
        }
        let p = apply(&w, x0);
        out.push(([p[0], p[1]], sign));
        for g in &generators {
            let next = mul(&w, g);
            let key = [
                next[0].iter().sum::<i64>(),
                next[1].iter().sum::<i64>(),
                next[2].iter().sum::<i64>(),
            ];
            if seen.insert(key) {
                queue.push_back((next, -sign));
            }
        }
    }
    out
}

/// Default quadrature resolution of the edge feed.
pub const DEFAULT_TIME_NODES: usize = 160;
pub const DEFAULT_SOURCE_NODES: usize = 400;

#[derive(Debug, Clone, PartialEq)]
enum Start {
    Interior { images: Vec<([f64; 2], f64)> },
    Edge { edge: usize, line: ImageSolution1d },
    Corner(usize),
}

/// Mixed density of the three-agent walk on the triangle: interior density,
/// a 1D density on each edge and atoms at the corners.
///
/// Starts on an edge evolve as that edge's two-agent solution; corner starts
/// stay put. Interior starts use the reflection-group image series, which
/// vanishes on all three edges; the flux it sends into each edge then moves
/// along the edge with the two-agent kernel until it sticks at a corner.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSolution2d {
    pub total: f64,
    pub rate: f64,
    pub x0: [f64; 2],
    pub elapsed: f64,
    pub time: f64,
    pub weights: BoundaryWeights,
    pub time_nodes: usize,
    pub source_nodes: usize,
    diffusion: [[f64; 2]; 2],
    edge_diffusion: f64,
    start: Start,
}

pub fn composite_solution_2d(x0: [f64; 2], t: f64, t0: f64, total: f64, rate: f64) -> Result<CompositeSolution2d> {
    let v = check_simplex(x0, total)?;
    let weights = boundary_weights(v);
    let diffusion = match QuadraticForm::symmetric(rate)? {
        QuadraticForm::Derived { diffusion } => diffusion,
        QuadraticForm::Verbatim { .. } => unreachable!(),
    };
    let d_edge = edge_diffusion(rate)?;
    let tau = t - t0;
    let start = if let Some(k) = weights.corners.iter().position(|&w| w == 1.0) {
        Start::Corner(k)
    } else if let Some(edge) = weights.edges.iter().position(|&w| w == 1.0) {
        Start::Edge {
            edge,
            line: image_solution_1d(edge_coordinate(edge, x0), t, t0, total, d_edge)?,
        }
    } else {
        if tau <= 0.0 {
            return Err(Error::DegenerateTime { t, t0 });
        }
        if !(rate > 0.0) {
            return Err(Error::InvalidConfig(format!("rate {rate} must be positive")));
        }
        let sigma = (6.0 * rate * tau).sqrt();
        Start::Interior {
            images: kaleidoscope(v, total, 10.0 * sigma),
        }
    };
    Ok(CompositeSolution2d {
        total,
        rate,
        x0,
        elapsed: tau.max(0.0),
        time: t,
        weights,
        time_nodes: DEFAULT_TIME_NODES,
        source_nodes: DEFAULT_SOURCE_NODES,
        diffusion,
        edge_diffusion: d_edge,
        start,
    })
}

struct EdgeFeed {
    /// Per edge: bin masses for each requested bin.
    edges: [Vec<f64>; 3],
    corners: [f64; 3],
}

impl CompositeSolution2d {
    pub fn image_count(&self) -> usize {
        match &self.start {
            Start::Interior { images } => images.len(),
            _ => 0,
        }
    }

    fn interior_density_at(&self, x: [f64; 2], tau: f64, images: &[([f64; 2], f64)]) -> f64 {
        let g = Gauss2::new(self.diffusion, tau).expect("positive rate");
        images
            .iter()
            .map(|&(p, s)| s * g.eval(x[0] - p[0], x[1] - p[1]))
            .sum()
    }

    /// Interior density at `x` (zero on and outside the boundary).
    pub fn density(&self, x: [f64; 2]) -> f64 {
        let Start::Interior { images } = &self.start else {
            return 0.0;
        };
        let v = full(x, self.total);
        if v.iter().any(|&c| c <= 0.0) {
            return 0.0;
        }
        self.interior_density_at(x, self.elapsed, images).max(0.0)
    }

    /// Outward flux per unit edge coordinate through `edge` at `s`, time `tau`.
    fn flux(&self, edge: usize, s: f64, tau: f64, images: &[([f64; 2], f64)]) -> f64 {
        let g = Gauss2::new(self.diffusion, tau).expect("positive rate");
        let point = match edge {
            0 => [0.0, s],
            1 => [s, 0.0],
            _ => [s, self.total - s],
        };
        let normal = match edge {
            0 => [-1.0, 0.0],
            1 => [0.0, -1.0],
            _ => [1.0, 1.0],
        };
        // D grad G = -(x - mu) G / (2 tau)
        let mut grad = [0.0; 2];
        for &(p, sign) in images {
            let dx = point[0] - p[0];
            let dy = point[1] - p[1];
            let w = sign * g.eval(dx, dy) / (2.0 * tau);
            grad[0] -= dx * w;
            grad[1] -= dy * w;
        }
        -(normal[0] * grad[0] + normal[1] * grad[1])
    }

    /// Convolves the edge flux with the two-agent kernel; `bounds` are the
    /// bin edges along each edge coordinate.
    fn feed(&self, images: &[([f64; 2], f64)], bounds: &[f64]) -> EdgeFeed {
        let q = self.time_nodes.max(1);
        let p = self.source_nodes.max(1);
        let du = 1.0 / q as f64;
        let ds = self.total / p as f64;
        let bins = bounds.len() - 1;
        let partial: Vec<(usize, Vec<f64>, [f64; 2])> = (0..3 * q)
            .into_par_iter()
            .map(|job| {
                let edge = job / q;
                let step = job % q;
                // graded mesh tau' = tau u^2, denser where the flux switches on
                let u = (step as f64 + 0.5) * du;
                let tau_src = self.elapsed * u * u;
                let dt = 2.0 * self.elapsed * u * du;
                let remaining = self.elapsed - tau_src;
                let mut masses = vec![0.0; bins];
                let mut scratch = vec![0.0; bins];
                let mut ends = [0.0; 2];
                for i in 0..p {
                    let s = (i as f64 + 0.5) * ds;
                    let weight = self.flux(edge, s, tau_src, images) * ds * dt;
                    if weight.abs() < 1e-16 {
                        continue;
                    }
                    let line = ImageSolution1d {
                        total: self.total,
                        x0: s,
                        diffusion: self.edge_diffusion,
                        elapsed: remaining,
                        time: self.time,
                    };
                    line.fill_interval_masses(bounds, &mut scratch);
                    for (m, v) in masses.iter_mut().zip(&scratch) {
                        *m += weight * v;
                    }
                    let [a, b] = line.atoms();
                    ends[0] += weight * a;
                    ends[1] += weight * b;
                }
                (edge, masses, ends)
            })
            .collect();
        let mut feed = EdgeFeed {
            edges: [vec![0.0; bins], vec![0.0; bins], vec![0.0; bins]],
            corners: [0.0; 3],
        };
        for (edge, masses, ends) in partial {
            for (a, b) in feed.edges[edge].iter_mut().zip(masses) {
                *a += b;
            }
            let [c0, c1] = EDGE_END_CORNERS[edge];
            feed.corners[c0] += ends[0];
            feed.corners[c1] += ends[1];
        }
        for e in feed.edges.iter_mut() {
            e.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        feed
    }

    /// Corner atoms, indexed by the agent holding everything.
    pub fn corner_atoms(&self) -> [f64; 3] {
        match &self.start {
            Start::Corner(k) => {
                let mut a = [0.0; 3];
                a[*k] = 1.0;
                a
            }
            Start::Edge { edge, line } => {
                let mut a = [0.0; 3];
                let [lo, hi] = line.atoms();
                a[EDGE_END_CORNERS[*edge][0]] = lo;
                a[EDGE_END_CORNERS[*edge][1]] = hi;
                a
            }
            Start::Interior { images } => self.feed(images, &[0.0, self.total]).corners,
        }
    }

    /// Node sum of the interior density on `cells` cells, times `h^2`.
    fn interior_node_sum(&self, images: &[([f64; 2], f64)], cells: usize) -> f64 {
        let h = self.total / cells as f64;
        let rows: Vec<f64> = (1..cells)
            .into_par_iter()
            .map(|i| {
                (1..cells - i)
                    .map(|j| self.interior_density_at([i as f64 * h, j as f64 * h], self.elapsed, images))
                    .sum::<f64>()
            })
            .collect();
        rows.iter().sum::<f64>() * h * h
    }

    /// Interior mass by Richardson-extrapolated node sums.
    pub fn interior_mass(&self) -> f64 {
        let Start::Interior { images } = &self.start else {
            return 0.0;
        };
        let coarse = self.interior_node_sum(images, 256);
        let fine = self.interior_node_sum(images, 512);
        (4.0 * fine - coarse) / 3.0
    }

    /// Total mass on each edge.
    pub fn edge_masses(&self) -> [f64; 3] {
        match &self.start {
            Start::Corner(_) => [0.0; 3],
            Start::Edge { edge, line } => {
                let mut m = [0.0; 3];
                m[*edge] = line.continuous_mass();
                m
            }
            Start::Interior { images } => {
                let feed = self.feed(images, &[0.0, self.total]);
                [feed.edges[0][0], feed.edges[1][0], feed.edges[2][0]]
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.interior_mass() + self.edge_masses().iter().sum::<f64>() + self.corner_atoms().iter().sum::<f64>()
    }

    /// Atoms as `((x1, x2), mass)` pairs.
    pub fn atoms(&self) -> Vec<([f64; 2], f64)> {
        let n = self.total;
        let spots = [[n, 0.0], [0.0, n], [0.0, 0.0]];
        spots.into_iter().zip(self.corner_atoms()).collect()
    }

    /// Density along `edge` at coordinate `s`.
    pub fn edge_density(&self, edge: usize, s: f64) -> f64 {
        if !(s > 0.0 && s < self.total) {
            return 0.0;
        }
        match &self.start {
            Start::Corner(_) => 0.0,
            Start::Edge { edge: e, line } => {
                if *e == edge {
                    line.density(s)
                } else {
                    0.0
                }
            }
            Start::Interior { .. } => {
                // The edge kernel is symmetric in (s, s'), so the mass it
                // carries from a narrow window around s is a density at s.
                let half = 1e-4 * self.total;
                let bounds = [s - half, s + half];
                self.feed_for(&bounds).edges[edge][0] / (2.0 * half)
            }
        }
    }

    fn feed_for(&self, bounds: &[f64]) -> EdgeFeed {
        match &self.start {
            Start::Interior { images } => self.feed(images, bounds),
            _ => unreachable!(),
        }
    }

    /// Node representation on `cells` cells: interior density sampled at
    /// the nodes, edge masses integrated over each node's cell (the nodes
    /// next to a corner take the half cell up to it), corner atoms.
    pub fn to_grid(&self, cells: usize) -> Result<TriangleGrid> {
        if cells < 2 {
            return Err(Error::InvalidConfig("a triangle grid needs at least two cells".into()));
        }
        let mut grid = TriangleGrid::zeros(self.total, cells, self.time);
        let h = grid.spacing();
        let bounds = cell_bounds(self.total, cells);
        match &self.start {
            Start::Corner(k) => grid.corners[*k] = 1.0,
            Start::Edge { edge, line } => {
                for (i, m) in line.interval_masses(&bounds).into_iter().enumerate() {
                    grid.edges[*edge][i + 1] = m / h;
                }
                grid.corners = self.corner_atoms();
            }
            Start::Interior { images } => {
                let nodes: Vec<(usize, usize)> = grid.nodes().collect();
                for (i, j) in nodes {
                    if grid.classify(i, j) == NodeClass::Interior {
                        let x = [i as f64 * h, j as f64 * h];
                        let idx = grid.index(i, j);
                        grid.density[idx] = self.interior_density_at(x, self.elapsed, images).max(0.0);
                    }
                }
                let feed = self.feed(images, &bounds);
                for (edge, masses) in feed.edges.iter().enumerate() {
                    for (i, m) in masses.iter().enumerate() {
                        grid.edges[edge][i + 1] = m / h;
                    }
                }
                grid.corners = feed.corners;
            }
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verbatim_form_is_refused() {
        let err = gaussian_2d([1.0, 1.0], 1.0, [1.0, 1.0], 0.0, &QuadraticForm::Verbatim { c: 0.5 }).unwrap_err();
        match err {
            Error::NonviableForm(ev) => {
                assert!((ev[0] - 3.0).abs() < 1e-12 && (ev[1] + 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reflections_preserve_the_plane() {
        let x = [4.0, 3.0, 3.0];
        for k in 0..3 {
            let y = apply(&reflection(k), x);
            assert!((y.iter().sum::<f64>() - 10.0).abs() < 1e-12);
            assert_eq!(y[k], -x[k]);
            let back = apply(&reflection(k), y);
            assert_eq!(back, x);
        }
    }

    #[test]
    fn weights_by_case() {
        assert_eq!(boundary_weights([4.0, 3.0, 3.0]).edges, [0.0; 3]);
        assert_eq!(boundary_weights([4.0, 3.0, 3.0]).corners, [0.0; 3]);
        assert_eq!(boundary_weights([0.0, 3.0, 7.0]).edges, [1.0, 0.0, 0.0]);
        assert_eq!(boundary_weights([0.0, 0.0, 10.0]).corners, [0.0, 0.0, 1.0]);
        assert_eq!(boundary_weights([10.0, 0.0, 0.0]).corners, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn interior_density_vanishes_on_edges() {
        let sol = composite_solution_2d([4.0, 3.0], 2.0, 0.0, 10.0, 0.25).unwrap();
        let Start::Interior { images } = &sol.start else { panic!() };
        let peak = sol.density([4.0, 3.0]);
        for s in [1.0, 3.0, 5.0, 7.0] {
            for x in [[0.0, s], [s, 0.0], [s, 10.0 - s]] {
                assert!(sol.interior_density_at(x, sol.elapsed, images).abs() < 1e-12 * peak);
            }
        }
    }

    #[test]
    fn corner_start_is_an_atom() {
        let sol = composite_solution_2d([0.0, 0.0], 1.0, 0.0, 10.0, 0.25).unwrap();
        assert_eq!(sol.corner_atoms(), [0.0, 0.0, 1.0]);
        let g = sol.to_grid(10).unwrap();
        assert_eq!(g.total_mass(), 1.0);
    }

    #[test]
    fn edge_start_follows_the_edge() {
        let sol = composite_solution_2d([0.0, 5.0], 4.0, 0.0, 10.0, 0.25).unwrap();
        let c = sol.corner_atoms();
        assert_eq!(c[0], 0.0);
        assert!((c[1] - c[2]).abs() < 1e-12);
        let g = sol.to_grid(20).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(g.edges[1].iter().sum::<f64>(), 0.0);
    }
}
