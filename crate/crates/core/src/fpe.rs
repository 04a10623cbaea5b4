//! Continuum (Fokker-Planck) route.
//!
//! Coefficients follow the second-order expansion of the master equation:
//! `a_i = sum_j (nu_ij - nu_ji)`, `b_i = sum_j (nu_ij + nu_ji)`,
//! `c_ij = nu_ij + nu_ji`, with time scaled as `dt = l^2`. The reduced
//! diffusion on simplex coordinates is the per-jump covariance
//! `D = (l^2 / 2 dt) sum nu j j^T`, which in terms of the coefficients is
//! `D = 1/2 [[b_1, -c_12], [-c_12, b_2]]` (or `b_1 / 2` on the segment).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{classify_node, edge_node, node_index, LineGrid, NodeClass, TriangleGrid, EDGE_END_CORNERS};
use crate::kernel::RateKernel;
use crate::model::{build_transition_table, WealthState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpeCoefficients {
    /// `a_i`
    pub drift: Vec<f64>,
    /// `b_i`
    pub diffusion: Vec<f64>,
    /// `c_ij`, symmetric with a zero diagonal.
    pub cross: Vec<Vec<f64>>,
    pub step: f64,
    pub dt: f64,
}

impl FpeCoefficients {
    /// Builds the coefficients from a matrix of per-step probabilities
    /// `nu[i][j]` (diagonal ignored), with `dt = step^2`.
    pub fn from_rates(nu: &[Vec<f64>], step: f64) -> Self {
        let n = nu.len();
        let mut drift = vec![0.0; n];
        let mut diffusion = vec![0.0; n];
        let mut cross = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                drift[i] += nu[i][j] - nu[j][i];
                diffusion[i] += nu[i][j] + nu[j][i];
                cross[i][j] = nu[i][j] + nu[j][i];
            }
        }
        Self {
            drift,
            diffusion,
            cross,
            step,
            dt: step * step,
        }
    }

    pub fn agents(&self) -> usize {
        self.drift.len()
    }
}

/// Coefficients of the kernel at `state`.
pub fn coefficients(kernel: &dyn RateKernel, state: &WealthState) -> Result<FpeCoefficients> {
    let table = build_transition_table(kernel, state)?;
    let n = state.agents();
    let mut nu = vec![vec![0.0; n]; n];
    for &(jump, p) in &table.entries {
        nu[jump.gainer][jump.loser] = p;
    }
    Ok(FpeCoefficients::from_rates(&nu, state.step()))
}

/// `nu_ij = c` for every ordered pair.
pub fn symmetric_rates(agents: usize, rate: f64) -> Vec<Vec<f64>> {
    (0..agents)
        .map(|i| (0..agents).map(|j| if i == j { 0.0 } else { rate }).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReducedDiffusion {
    /// Coefficient of `f_xx` in `x1` for two agents.
    Line(f64),
    /// Matrix `D` of `f_t = sum D_ab f_ab` in `(x1, x2)` for three agents.
    Plane([[f64; 2]; 2]),
}

impl ReducedDiffusion {
    /// Largest eigenvalue, used by the stability bound.
    pub fn max_eigenvalue(&self) -> f64 {
        match *self {
            Self::Line(d) => d,
            Self::Plane([[a, b], [_, d]]) => {
                let mean = 0.5 * (a + d);
                mean + (0.25 * (a - d) * (a - d) + b * b).sqrt()
            }
        }
    }
}

/// Diffusion on the simplex coordinates `(x1)` or `(x1, x2)`.
pub fn reduce(coefficients: &FpeCoefficients) -> Result<ReducedDiffusion> {
    let scale = coefficients.step * coefficients.step / (2.0 * coefficients.dt);
    match coefficients.agents() {
        2 => Ok(ReducedDiffusion::Line(scale * coefficients.diffusion[0])),
        3 => {
            let b = &coefficients.diffusion;
            let c12 = coefficients.cross[0][1];
            Ok(ReducedDiffusion::Plane([
                [scale * b[0], -scale * c12],
                [-scale * c12, scale * b[1]],
            ]))
        }
        n => Err(Error::UnsupportedAgents(n)),
    }
}

/// The two-agent coefficient obtained by writing the full second-order
/// operator on the line `x1 + x2 = N` with `d/dx2 = -d/dx1`:
/// `(l^2 / 2 dt)(b_1 + b_2) + (l^2 / dt) c_12`. For `nu = c` this gives `4c`,
/// four times the variance rate the chain actually has; kept for reference,
/// the solvers use [`reduce`].
pub fn line_substitution_diffusion(coefficients: &FpeCoefficients) -> Result<f64> {
    if coefficients.agents() != 2 {
        return Err(Error::UnsupportedAgents(coefficients.agents()));
    }
    let l2dt = coefficients.step * coefficients.step / coefficients.dt;
    Ok(0.5 * l2dt * (coefficients.diffusion[0] + coefficients.diffusion[1])
        + l2dt * coefficients.cross[0][1])
}

/// Reduced diffusion of the symmetric constant kernel `nu_ij = c`.
pub fn symmetric_diffusion(agents: usize, rate: f64) -> Result<ReducedDiffusion> {
    reduce(&FpeCoefficients::from_rates(&symmetric_rates(agents, rate), 1.0))
}

/// Inputs of the finite-difference solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Symmetric rate `c` (`nu_ij = c` between solvent agents).
    pub rate: f64,
    /// Total wealth `N`.
    pub total: f64,
    /// `x1` (segment) or `(x1, x2)` (triangle).
    pub start: Vec<f64>,
    pub t0: f64,
    /// Grid spacing `h`; `N / h` must be an integer.
    pub spacing: f64,
    /// Time step; defaults to the largest stable step that divides the horizon.
    pub time_step: Option<f64>,
    /// Elapsed time `T` to integrate over.
    pub horizon: f64,
    /// Elapsed times at which to keep a snapshot; the horizon is always kept.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

struct Plan {
    cells: usize,
    h: f64,
    tau: f64,
    steps: u64,
    keep: Vec<u64>,
}

fn plan(config: &SolverConfig, diffusion: &ReducedDiffusion) -> Result<Plan> {
    if !(config.total > 0.0 && config.spacing > 0.0) {
        return Err(Error::InvalidConfig("total and spacing must be positive".into()));
    }
    if !(config.horizon >= 0.0 && config.horizon.is_finite()) {
        return Err(Error::InvalidConfig(format!("horizon {} must be >= 0", config.horizon)));
    }
    if config.rate < 0.0 {
        return Err(Error::InvalidConfig(format!("rate {} must be >= 0", config.rate)));
    }
    let ratio = config.total / config.spacing;
    let cells = ratio.round() as usize;
    if cells < 2 || (ratio - cells as f64).abs() > 1e-9 * ratio {
        return Err(Error::InvalidConfig(format!(
            "spacing {} does not divide total {} into at least two cells",
            config.spacing, config.total
        )));
    }
    let h = config.total / cells as f64;
    let d_max = diffusion.max_eigenvalue();
    let limit = if d_max > 0.0 { h * h / (4.0 * d_max) } else { f64::INFINITY };
    let (tau, steps) = match config.time_step {
        Some(tau) => {
            if !(tau > 0.0) {
                return Err(Error::InvalidConfig(format!("time step {tau} must be positive")));
            }
            if tau > limit * (1.0 + 1e-12) {
                return Err(Error::Cfl { tau, limit });
            }
            (tau, (config.horizon / tau).round() as u64)
        }
        None if config.horizon == 0.0 => (limit.min(1.0), 0),
        None => {
            let steps = if limit.is_finite() {
                (config.horizon / limit).ceil().max(1.0) as u64
            } else {
                1
            };
            (config.horizon / steps as f64, steps)
        }
    };
    let mut keep: Vec<u64> = config
        .snapshots
        .iter()
        .map(|&t| {
            if !(0.0..=config.horizon * (1.0 + 1e-12)).contains(&t) {
                Err(Error::InvalidConfig(format!("snapshot time {t} outside [0, {}]", config.horizon)))
            } else {
                Ok((t / tau).round() as u64)
            }
        })
        .collect::<Result<_>>()?;
    keep.push(steps);
    keep.sort_unstable();
    keep.dedup();
    Ok(Plan {
        cells,
        h,
        tau,
        steps,
        keep,
    })
}

/// Nearest node to `x`; exact midpoints are rejected.
fn snap(x: f64, h: f64, cells: usize) -> Result<usize> {
    let q = x / h;
    if !(x.is_finite() && q >= -1e-9 && q <= cells as f64 + 1e-9) {
        return Err(Error::OffGrid(format!("{x} lies outside [0, {}]", h * cells as f64)));
    }
    if ((q - q.floor()) - 0.5).abs() < 1e-9 {
        return Err(Error::OffGrid(format!("{x} is exactly between two nodes (h = {h})")));
    }
    Ok(q.round() as usize)
}

/// Explicit scheme for `f_t = D f_xx` on `(0, N)` with sticky endpoints.
/// Flux through the first and last interior node feeds the endpoint atoms.
pub fn solve_1d(config: &SolverConfig) -> Result<Vec<LineGrid>> {
    if config.start.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "segment solver takes one start coordinate, got {}",
            config.start.len()
        )));
    }
    let diffusion = symmetric_diffusion(2, config.rate)?;
    let d = match diffusion {
        ReducedDiffusion::Line(d) => d,
        ReducedDiffusion::Plane(_) => unreachable!("two agents reduce to a line"),
    };
    let plan = plan(config, &diffusion)?;
    let m = plan.cells;
    let h = plan.h;
    let start = snap(config.start[0], h, m)?;

    let mut grid = LineGrid::zeros(config.total, m, config.t0);
    match start {
        0 => grid.atoms[0] = 1.0,
        s if s == m => grid.atoms[1] = 1.0,
        s => grid.density[s] = 1.0 / h,
    }

    let r = d * plan.tau / (h * h);
    let mut out = Vec::with_capacity(plan.keep.len());
    let mut next = grid.density.clone();
    let mut keep = plan.keep.iter().peekable();
    for step in 0..=plan.steps {
        if step > 0 {
            let f = &grid.density;
            for i in 1..m {
                next[i] = f[i] + r * (f[i + 1] - 2.0 * f[i] + f[i - 1]);
            }
            grid.atoms[0] += r * f[1] * h;
            grid.atoms[1] += r * f[m - 1] * h;
            std::mem::swap(&mut grid.density, &mut next);
            grid.time = config.t0 + step as f64 * plan.tau;
        }
        while keep.peek() == Some(&&step) {
            out.push(grid.clone());
            keep.next();
        }
    }
    Ok(out)
}

/// Neighbour offsets and weights of the positive 7-point stencil for
/// `D11 f_xx + 2 D12 f_xy + D22 f_yy`.
fn stencil(d: [[f64; 2]; 2]) -> Result<Vec<(isize, isize, f64)>> {
    let [[d11, d12], [_, d22]] = d;
    let (diag, sign) = if d12 <= 0.0 { (-d12, -1) } else { (d12, 1) };
    let ew = d11 - diag;
    let ns = d22 - diag;
    if ew < -1e-15 || ns < -1e-15 {
        return Err(Error::InvalidConfig(format!(
            "diffusion {d:?} is not diagonally dominant; the explicit stencil would not be monotone"
        )));
    }
    Ok(vec![
        (1, 0, ew),
        (-1, 0, ew),
        (0, 1, ns),
        (0, -1, ns),
        (1, sign, diag),
        (-1, -sign, diag),
    ])
}

/// Explicit scheme for `f_t = div(D grad f)` on the triangle. Mass stepping
/// onto an edge joins that edge's 1D density, which diffuses with the
/// two-agent coefficient; mass leaving an edge end sticks at the corner.
pub fn solve_2d(config: &SolverConfig) -> Result<Vec<TriangleGrid>> {
    if config.start.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "triangle solver takes two start coordinates, got {}",
            config.start.len()
        )));
    }
    let diffusion = symmetric_diffusion(3, config.rate)?;
    let d = match diffusion {
        ReducedDiffusion::Plane(d) => d,
        ReducedDiffusion::Line(_) => unreachable!("three agents reduce to a plane"),
    };
    let d_edge = match symmetric_diffusion(2, config.rate)? {
        ReducedDiffusion::Line(d) => d,
        ReducedDiffusion::Plane(_) => unreachable!(),
    };
    let plan = plan(config, &diffusion)?;
    let m = plan.cells;
    let h = plan.h;
    let si = snap(config.start[0], h, m)?;
    let sj = snap(config.start[1], h, m)?;
    if si + sj > m {
        return Err(Error::OffGrid(format!("start {:?} lies outside the simplex", config.start)));
    }
    if classify_node(m, si, sj) != NodeClass::Interior {
        return Err(Error::OffGrid(format!(
            "start {:?} is on the boundary; use the segment solver on that edge",
            config.start
        )));
    }

    let weights = stencil(d)?;
    let lambda = plan.tau / (h * h);
    let r_edge = d_edge * lambda;

    let mut grid = TriangleGrid::zeros(config.total, m, config.t0);
    grid.density[node_index(m, si, sj)] = 1.0 / (h * h);

    let interior: Vec<(usize, usize)> = grid
        .nodes()
        .filter(|&(i, j)| classify_node(m, i, j) == NodeClass::Interior)
        .collect();

    let mut next = grid.density.clone();
    let mut deposit: [Vec<f64>; 3] = [vec![0.0; m + 1], vec![0.0; m + 1], vec![0.0; m + 1]];
    let mut edge_next = vec![0.0; m + 1];
    let mut out = Vec::with_capacity(plan.keep.len());
    let mut keep = plan.keep.iter().peekable();

    for step in 0..=plan.steps {
        if step > 0 {
            next.copy_from_slice(&grid.density);
            for dep in deposit.iter_mut() {
                dep.iter_mut().for_each(|v| *v = 0.0);
            }
            let mut corner_deposit = [0.0; 3];
            for &(i, j) in &interior {
                let src = node_index(m, i, j);
                let f = grid.density[src];
                if f == 0.0 {
                    continue;
                }
                for &(di, dj, w) in &weights {
                    if w == 0.0 {
                        continue;
                    }
                    let moved = f * w * lambda;
                    let ti = (i as isize + di) as usize;
                    let tj = (j as isize + dj) as usize;
                    next[src] -= moved;
                    match classify_node(m, ti, tj) {
                        NodeClass::Interior => next[node_index(m, ti, tj)] += moved,
                        NodeClass::Edge { edge, s } => deposit[edge][s] += moved * h,
                        NodeClass::Corner(k) => corner_deposit[k] += moved * h * h,
                    }
                }
            }
            std::mem::swap(&mut grid.density, &mut next);

            for (edge, ends) in EDGE_END_CORNERS.iter().enumerate() {
                let g = &grid.edges[edge];
                edge_next[0] = 0.0;
                edge_next[m] = 0.0;
                for s in 1..m {
                    edge_next[s] = g[s] + r_edge * (g[s + 1] - 2.0 * g[s] + g[s - 1]) + deposit[edge][s];
                }
                grid.corners[ends[0]] += r_edge * g[1] * h;
                grid.corners[ends[1]] += r_edge * g[m - 1] * h;
                grid.edges[edge].copy_from_slice(&edge_next);
            }
            for k in 0..3 {
                grid.corners[k] += corner_deposit[k];
            }
            grid.time = config.t0 + step as f64 * plan.tau;
        }
        while keep.peek() == Some(&&step) {
            out.push(grid.clone());
            keep.next();
        }
    }
    Ok(out)
}

/// Position of an edge node in `(x1, x2)`.
pub fn edge_point(total: f64, cells: usize, edge: usize, s: usize) -> [f64; 2] {
    let h = total / cells as f64;
    let (i, j) = edge_node(cells, edge, s);
    [i as f64 * h, j as f64 * h]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ConstantKernel, KappaForm, TableKernel};

    fn config_1d(rate: f64, start: f64, horizon: f64) -> SolverConfig {
        SolverConfig {
            rate,
            total: 10.0,
            start: vec![start],
            t0: 0.0,
            spacing: 0.05,
            time_step: None,
            horizon,
            snapshots: vec![],
        }
    }

    #[test]
    fn two_agent_symmetric_coefficients() {
        let kernel = ConstantKernel::new(2, 0.3).unwrap();
        let s = WealthState::new(&[3.0, 7.0], 1.0).unwrap();
        let c = coefficients(&kernel, &s).unwrap();
        assert_eq!(c.drift, vec![0.0, 0.0]);
        for b in &c.diffusion {
            assert!((b - 0.6).abs() < 1e-15);
        }
        assert!((c.cross[0][1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn three_agent_symmetric_coefficients() {
        let kernel = ConstantKernel::new(3, 0.1).unwrap();
        let s = WealthState::new(&[4.0, 3.0, 3.0], 1.0).unwrap();
        let c = coefficients(&kernel, &s).unwrap();
        for i in 0..3 {
            assert!(c.drift[i].abs() < 1e-15);
            assert!((c.diffusion[i] - 0.4).abs() < 1e-12);
            for j in 0..3 {
                if i != j {
                    assert!((c.cross[i][j] - 0.2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bankrupt_agent_has_empty_rows() {
        let kernel = ConstantKernel::new(3, 0.1).unwrap();
        let s = WealthState::new(&[0.0, 4.0, 6.0], 1.0).unwrap();
        let c = coefficients(&kernel, &s).unwrap();
        assert_eq!(c.diffusion[0], 0.0);
        assert_eq!(c.cross[0][1], 0.0);
        assert_eq!(c.cross[2][0], 0.0);
        assert!((c.cross[1][2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_drift() {
        let kernel = TableKernel::new(
            2,
            vec![(0, 1, KappaForm::Constant(0.4)), (1, 0, KappaForm::Constant(0.1))],
        )
        .unwrap();
        let s = WealthState::new(&[3.0, 7.0], 1.0).unwrap();
        let c = coefficients(&kernel, &s).unwrap();
        assert!((c.drift[0] - 0.3).abs() < 1e-15);
        assert!((c.drift[1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn reductions() {
        assert_eq!(symmetric_diffusion(2, 0.5).unwrap(), ReducedDiffusion::Line(0.5));
        match symmetric_diffusion(3, 0.5).unwrap() {
            ReducedDiffusion::Plane(d) => {
                assert_eq!(d, [[1.0, -0.5], [-0.5, 1.0]]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(symmetric_diffusion(3, 0.0).unwrap(), ReducedDiffusion::Plane([[0.0, -0.0], [-0.0, 0.0]]));
        assert!(matches!(symmetric_diffusion(4, 0.1), Err(Error::UnsupportedAgents(4))));
    }

    #[test]
    fn line_substitution_gives_four_c() {
        let c = FpeCoefficients::from_rates(&symmetric_rates(2, 0.5), 0.1);
        assert!((line_substitution_diffusion(&c).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hexagonal_stencil_is_uniform() {
        let w = stencil([[1.0, -0.5], [-0.5, 1.0]]).unwrap();
        assert!(w.iter().all(|&(_, _, v)| (v - 0.5).abs() < 1e-15));
        assert!(stencil([[1.0, -2.0], [-2.0, 1.0]]).is_err());
    }

    #[test]
    fn zero_rate_keeps_the_spike() {
        let grids = solve_1d(&config_1d(0.0, 3.0, 5.0)).unwrap();
        let last = grids.last().unwrap();
        assert_eq!(last.density[60], 20.0);
        assert_eq!(last.atoms, [0.0, 0.0]);
    }

    #[test]
    fn segment_solver_conserves_mass() {
        let mut cfg = config_1d(0.5, 3.0, 20.0);
        cfg.spacing = 0.25;
        cfg.snapshots = vec![1.0, 5.0, 10.0];
        let grids = solve_1d(&cfg).unwrap();
        assert_eq!(grids.len(), 4);
        let mut prev = [0.0, 0.0];
        for g in &grids {
            assert!((g.total_mass() - 1.0).abs() < 1e-12);
            assert!(g.density.iter().all(|&v| v >= 0.0));
            assert!(g.atoms[0] >= prev[0] && g.atoms[1] >= prev[1]);
            prev = g.atoms;
        }
    }

    #[test]
    fn cfl_and_grid_errors() {
        let mut cfg = config_1d(0.5, 3.0, 1.0);
        cfg.time_step = Some(0.01);
        assert!(matches!(solve_1d(&cfg), Err(Error::Cfl { .. })));
        let mut cfg = config_1d(0.5, 3.025, 1.0);
        assert!(matches!(solve_1d(&cfg), Err(Error::OffGrid(_))));
        cfg.start = vec![3.02];
        assert!(solve_1d(&cfg).is_ok());
        cfg.spacing = 0.3;
        assert!(matches!(solve_1d(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn triangle_solver_conserves_mass() {
        let cfg = SolverConfig {
            rate: 0.5,
            total: 10.0,
            start: vec![4.0, 3.0],
            t0: 0.0,
            spacing: 0.5,
            time_step: None,
            horizon: 30.0,
            snapshots: vec![5.0, 10.0, 20.0],
        };
        let grids = solve_2d(&cfg).unwrap();
        let mut prev = [0.0; 3];
        for g in &grids {
            assert!((g.total_mass() - 1.0).abs() < 1e-12, "{}", g.total_mass());
            assert!(g.density.iter().all(|&v| v >= 0.0));
            for k in 0..3 {
                assert!(g.corners[k] >= prev[k]);
            }
            prev = g.corners;
        }
        assert!(grids.last().unwrap().corners.iter().sum::<f64>() > 0.1);
    }

    #[test]
    fn triangle_solver_rejects_boundary_starts() {
        let cfg = SolverConfig {
            rate: 0.1,
            total: 10.0,
            start: vec![0.0, 3.0],
            t0: 0.0,
            spacing: 0.5,
            time_step: None,
            horizon: 1.0,
            snapshots: vec![],
        };
        assert!(matches!(solve_2d(&cfg), Err(Error::OffGrid(_))));
    }

    #[test]
    fn zero_rate_triangle_is_static() {
        let cfg = SolverConfig {
            rate: 0.0,
            total: 10.0,
            start: vec![4.0, 3.0],
            t0: 0.0,
            spacing: 0.5,
            time_step: None,
            horizon: 3.0,
            snapshots: vec![],
        };
        let g = solve_2d(&cfg).unwrap().pop().unwrap();
        assert_eq!(g.density[g.index(8, 6)], 4.0);
        assert_eq!(g.interior_mass(), 1.0);
    }
}
