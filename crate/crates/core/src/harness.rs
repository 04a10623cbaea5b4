//! Cross-route validation: histograms, distances, moments and reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{composite_solution_2d, image_solution_1d};
use crate::error::{Error, Result};
use crate::fpe::{solve_1d, solve_2d, symmetric_diffusion, ReducedDiffusion, SolverConfig};
use crate::grid::{node_index, triangle_nodes, DensityGrid, LineGrid, TriangleGrid};
use crate::kernel::ConstantKernel;
use crate::master::{enumerate_states, evolve, ProbabilityField, Snapshots, StateSpace};
use crate::model::{classify_state, StateClass, WealthState};
use crate::sim::{run_ensemble, Recording, TrajectoryEnsemble};

/// Steps of the scaled chain (`dt = l^2`) that reach continuum time `t`.
pub fn matched_steps(t: f64, step: f64) -> Result<u64> {
    if !(t >= 0.0 && step > 0.0) {
        return Err(Error::TimeMismatch(format!("time {t} and step {step} must be nonnegative and positive")));
    }
    let exact = t / (step * step);
    let steps = exact.round();
    if (exact - steps).abs() > 1e-6 * exact.max(1.0) {
        return Err(Error::TimeMismatch(format!(
            "t = {t} is {exact} steps of dt = {}, not a whole number",
            step * step
        )));
    }
    Ok(steps as u64)
}

fn lattice_grid(
    agents: usize,
    total: f64,
    total_units: i64,
    masses: impl Iterator<Item = (Vec<i64>, f64)>,
    scale: f64,
    time: f64,
) -> Result<DensityGrid> {
    let m = total_units as usize;
    match agents {
        2 => {
            let mut node = vec![0.0; m + 1];
            for (u, p) in masses {
                node[u[0] as usize] += p;
            }
            node.iter_mut().for_each(|v| *v *= scale);
            Ok(DensityGrid::Line(LineGrid::from_node_masses(total, &node, time)))
        }
        3 => {
            let mut node = vec![0.0; triangle_nodes(m)];
            for (u, p) in masses {
                node[node_index(m, u[0] as usize, u[1] as usize)] += p;
            }
            node.iter_mut().for_each(|v| *v *= scale);
            Ok(DensityGrid::Triangle(TriangleGrid::from_node_masses(total, m, &node, time)))
        }
        n => Err(Error::UnsupportedAgents(n)),
    }
}

fn coarsen_to(grid: DensityGrid, cells: usize) -> Result<DensityGrid> {
    let fine = grid.cells();
    if cells == 0 || !fine.is_multiple_of(cells) {
        return Err(Error::IncompatibleDomains(format!("{cells} cells do not divide the lattice of {fine}")));
    }
    grid.coarsen(fine / cells)
}

/// Occupancy of the ensemble at `step` on a grid of `cells` cells (which
/// must divide the lattice); corners and edges land on boundary nodes.
pub fn histogram(ensemble: &TrajectoryEnsemble, step: u64, cells: usize) -> Result<DensityGrid> {
    let first = ensemble.trajectories.first().ok_or(Error::EmptyEnsemble)?;
    let init = first.initial();
    let count = ensemble.trajectories.len() as f64;
    let states = ensemble
        .trajectories
        .iter()
        .map(|tr| {
            tr.state_at(step)
                .map(|s| (s.units().to_vec(), 1.0))
                .ok_or_else(|| Error::OutOfRange(format!("step {step} was not recorded (horizon {})", tr.t_max)))
        })
        .collect::<Result<Vec<_>>>()?;
    let l = init.step();
    let total = init.total_units() as f64 * l;
    let time = step as f64 * l * l;
    let grid = lattice_grid(init.agents(), total, init.total_units(), states.into_iter(), 1.0 / count, time)?;
    coarsen_to(grid, cells)
}

/// Master-equation field on a grid of `cells` cells.
pub fn field_to_grid(field: &ProbabilityField, space: &StateSpace, cells: usize) -> Result<DensityGrid> {
    if field.mass.len() != space.len() {
        return Err(Error::IncompatibleDomains(format!(
            "field has {} entries, state space has {}",
            field.mass.len(),
            space.len()
        )));
    }
    let l = space.step();
    let masses = (0..space.len()).map(|i| (space.units(i).to_vec(), field.mass[i]));
    let grid = lattice_grid(
        space.agents(),
        space.total(),
        space.total_units(),
        masses,
        1.0,
        field.time as f64 * l * l,
    )?;
    coarsen_to(grid, cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Total variation `1/2 sum |p - q|` over node masses.
    pub tv: f64,
    /// `sum |p - q|` over interior nodes.
    pub l1_interior: f64,
    /// Largest difference of a boundary node mass.
    pub boundary_discrepancy: f64,
    /// Largest difference of the cumulative masses (segment only).
    pub ks: Option<f64>,
}

/// Distances between two distributions on the same domain; the finer grid
/// is aggregated onto the coarser one first.
pub fn distance(p: &DensityGrid, q: &DensityGrid) -> Result<Metrics> {
    let same_kind = matches!((p, q), (DensityGrid::Line(_), DensityGrid::Line(_)) | (DensityGrid::Triangle(_), DensityGrid::Triangle(_)));
    if !same_kind {
        return Err(Error::IncompatibleDomains("a segment and a triangle".into()));
    }
    if (p.total() - q.total()).abs() > 1e-9 * p.total().max(q.total()) {
        return Err(Error::IncompatibleDomains(format!("totals {} and {}", p.total(), q.total())));
    }
    let cells = p.cells().min(q.cells());
    let p = coarsen_to(p.clone(), cells)?;
    let q = coarsen_to(q.clone(), cells)?;
    let a = p.node_masses();
    let b = q.node_masses();
    let boundary = p.is_boundary_node();
    let mut tv = 0.0;
    let mut l1_interior = 0.0;
    let mut boundary_discrepancy: f64 = 0.0;
    for ((x, y), on_boundary) in a.iter().zip(&b).zip(boundary) {
        let d = (x - y).abs();
        tv += d;
        if on_boundary {
            boundary_discrepancy = boundary_discrepancy.max(d);
        } else {
            l1_interior += d;
        }
    }
    let ks = match p {
        DensityGrid::Line(_) => {
            let mut acc = 0.0;
            let mut worst: f64 = 0.0;
            for (x, y) in a.iter().zip(&b) {
                acc += x - y;
                worst = worst.max(acc.abs());
            }
            Some(worst)
        }
        DensityGrid::Triangle(_) => None,
    };
    Ok(Metrics {
        tv: 0.5 * tv,
        l1_interior,
        boundary_discrepancy,
        ks,
    })
}

/// Total variation between two fields on the same state space.
pub fn field_distance(p: &ProbabilityField, q: &ProbabilityField) -> Result<f64> {
    if p.mass.len() != q.mass.len() {
        return Err(Error::IncompatibleDomains(format!("{} and {} states", p.mass.len(), q.mass.len())));
    }
    Ok(0.5 * p.mass.iter().zip(&q.mass).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Mean and covariance in the reduced coordinates `(x1)` or `(x1, x2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

fn weighted_moments<'a>(dim: usize, points: impl Iterator<Item = (&'a [f64], f64)> + Clone) -> Moments {
    let total: f64 = points.clone().map(|(_, w)| w).sum();
    let mut mean = vec![0.0; dim];
    if total > 0.0 {
        for (x, w) in points.clone() {
            for k in 0..dim {
                mean[k] += w * x[k] / total;
            }
        }
    }
    let mut covariance = vec![vec![0.0; dim]; dim];
    if total > 0.0 {
        for (x, w) in points {
            for a in 0..dim {
                for b in 0..dim {
                    covariance[a][b] += w * (x[a] - mean[a]) * (x[b] - mean[b]) / total;
                }
            }
        }
    }
    Moments { mean, covariance }
}

pub fn grid_moments(grid: &DensityGrid) -> Moments {
    let coords = grid.node_coordinates();
    let masses = grid.node_masses();
    let dim = coords.first().map_or(0, Vec::len);
    weighted_moments(dim, coords.iter().map(Vec::as_slice).zip(masses.iter().copied()))
}

/// Moments of the ensemble at `step`, optionally over runs that have not
/// reached a corner. Returns the moments and the number of runs used.
pub fn ensemble_moments(ensemble: &TrajectoryEnsemble, step: u64, surviving_only: bool) -> Result<(Moments, usize)> {
    let first = ensemble.trajectories.first().ok_or(Error::EmptyEnsemble)?;
    let dim = first.initial().agents() - 1;
    let mut points = Vec::with_capacity(ensemble.trajectories.len());
    for tr in &ensemble.trajectories {
        let s = tr
            .state_at(step)
            .ok_or_else(|| Error::OutOfRange(format!("step {step} was not recorded")))?;
        if surviving_only && matches!(classify_state(s), StateClass::Corner(_)) {
            continue;
        }
        points.push(s.wealth_vec()[..dim].to_vec());
    }
    let used = points.len();
    Ok((weighted_moments(dim, points.iter().map(|p| (p.as_slice(), 1.0))), used))
}

/// Variance of `x1` over runs still away from the corners at `step`.
pub fn pre_absorption_variance(ensemble: &TrajectoryEnsemble, step: u64) -> Result<f64> {
    let (m, used) = ensemble_moments(ensemble, step, true)?;
    if used < 2 {
        return Err(Error::EmptyEnsemble);
    }
    Ok(m.covariance[0][0])
}

/// Rough Monte Carlo standard error of a TV estimate from `samples` draws.
pub fn tv_noise(grid: &DensityGrid, samples: usize) -> f64 {
    let n = samples as f64;
    0.5 * grid
        .node_masses()
        .iter()
        .map(|&p| (p * (1.0 - p) / n).max(0.0).sqrt())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Mc,
    Master,
    Fpe,
    Analytic,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Mc => "mc",
            Route::Master => "master",
            Route::Fpe => "fpe",
            Route::Analytic => "analytic",
        }
    }

    fn is_lattice(self) -> bool {
        matches!(self, Route::Mc | Route::Master)
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mc" | "sim" | "simulate" => Ok(Route::Mc),
            "master" => Ok(Route::Master),
            "fpe" => Ok(Route::Fpe),
            "analytic" => Ok(Route::Analytic),
            other => Err(Error::InvalidConfig(format!("unknown route {other:?} (mc, master, fpe, analytic)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Tv,
    L1Interior,
    BoundaryDiscrepancy,
    Ks,
}

impl Metric {
    pub fn value(self, m: &Metrics) -> Option<f64> {
        match self {
            Metric::Tv => Some(m.tv),
            Metric::L1Interior => Some(m.l1_interior),
            Metric::BoundaryDiscrepancy => Some(m.boundary_discrepancy),
            Metric::Ks => m.ks,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tv" => Ok(Metric::Tv),
            "l1" | "l1_interior" => Ok(Metric::L1Interior),
            "boundary" | "boundary_discrepancy" => Ok(Metric::BoundaryDiscrepancy),
            "ks" => Ok(Metric::Ks),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub metric: Metric,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub metric: Metric,
    pub limit: f64,
    pub value: Option<f64>,
    pub pass: bool,
}

/// Default acceptance limits for a pair of routes.
pub fn default_tolerances(a: Route, b: Route) -> Vec<Tolerance> {
    let tv = |limit| vec![Tolerance { metric: Metric::Tv, limit }];
    match (a.is_lattice(), b.is_lattice()) {
        (true, true) => tv(0.02),
        (false, false) => vec![
            Tolerance {
                metric: Metric::L1Interior,
                limit: 0.05,
            },
            Tolerance {
                metric: Metric::BoundaryDiscrepancy,
                limit: 0.01,
            },
        ],
        _ => tv(0.08),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSummary {
    pub route: Route,
    /// Trajectory count for Monte Carlo, node count otherwise.
    pub size: usize,
    pub moments: Moments,
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub routes: [RouteSummary; 2],
    pub time: f64,
    pub step: f64,
    pub cells: usize,
    pub metrics: Metrics,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn new(routes: [RouteSummary; 2], time: f64, step: f64, cells: usize, metrics: Metrics, tolerances: &[Tolerance]) -> Self {
        let checks: Vec<Check> = tolerances
            .iter()
            .map(|t| {
                let value = t.metric.value(&metrics);
                Check {
                    metric: t.metric,
                    limit: t.limit,
                    value,
                    pass: value.is_some_and(|v| v < t.limit),
                }
            })
            .collect();
        let pass = checks.iter().all(|c| c.pass);
        Self {
            routes,
            time,
            step,
            cells,
            metrics,
            checks,
            pass,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} vs {}  t={}  l={}  cells={}\n",
            self.routes[0].route, self.routes[1].route, self.time, self.step, self.cells
        );
        out += &format!("{:<22}{:>14}\n", "metric", "value");
        out += &format!("{:<22}{:>14.6e}\n", "tv", self.metrics.tv);
        out += &format!("{:<22}{:>14.6e}\n", "l1_interior", self.metrics.l1_interior);
        out += &format!("{:<22}{:>14.6e}\n", "boundary_discrepancy", self.metrics.boundary_discrepancy);
        if let Some(ks) = self.metrics.ks {
            out += &format!("{:<22}{:>14.6e}\n", "ks", ks);
        }
        for r in &self.routes {
            out += &format!("{:<8} size={:<9} mean={:?}\n", r.route.name(), r.size, r.moments.mean);
        }
        for c in &self.checks {
            out += &format!(
                "check {:?} < {}: {} ({})\n",
                c.metric,
                crate::export::num(c.limit),
                c.value.map_or("n/a".to_string(), |v| format!("{v:.6e}")),
                if c.pass { "pass" } else { "FAIL" }
            );
        }
        out
    }
}

/// One comparison between two routes of the symmetric constant kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub routes: [Route; 2],
    pub agents: usize,
    pub total: f64,
    /// Lattice step `l`; continuum time `t` corresponds to `t / l^2` steps.
    pub step: f64,
    pub x0: Vec<f64>,
    /// `nu_ij = rate`.
    pub rate: f64,
    pub time: f64,
    pub count: usize,
    pub master_seed: u64,
    /// Finite-difference spacing; defaults to `l`.
    pub spacing: Option<f64>,
    /// Comparison grid; see [`default_cells`].
    pub cells: Option<usize>,
    pub tolerances: Option<Vec<Tolerance>>,
}

/// Lattice-vs-continuum comparisons of two agents use bins of two lattice
/// steps: with no holding probability the chain alternates parity.
pub fn default_cells(spec: &CompareSpec, total_units: usize) -> usize {
    let mixed = spec.routes[0].is_lattice() != spec.routes[1].is_lattice();
    if mixed && spec.agents == 2 && total_units.is_multiple_of(2) {
        total_units / 2
    } else {
        total_units
    }
}

/// Distribution of one route at the spec's time on its native grid.
pub fn route_grid(route: Route, spec: &CompareSpec) -> Result<(DensityGrid, RouteSummary)> {
    let init = WealthState::new(&spec.x0, spec.step)?;
    if init.agents() != spec.agents {
        return Err(Error::DimensionMismatch {
            expected: spec.agents,
            found: init.agents(),
        });
    }
    if (init.total_units() as f64 * spec.step - spec.total).abs() > 1e-9 * spec.total {
        return Err(Error::InvalidState(format!("x0 {:?} does not sum to N = {}", spec.x0, spec.total)));
    }
    let steps = matched_steps(spec.time, spec.step)?;
    let units = init.total_units() as usize;
    let reduced: Vec<f64> = spec.x0[..spec.agents - 1].to_vec();
    let (grid, size, noise) = match route {
        Route::Mc => {
            let kernel = ConstantKernel::new(spec.agents, spec.rate)?;
            let ens = run_ensemble(&init, &kernel, steps, spec.count, spec.master_seed, Recording::FinalOnly)?;
            let g = histogram(&ens, steps, units)?;
            let noise = tv_noise(&g, spec.count);
            (g, spec.count, Some(noise))
        }
        Route::Master => {
            let kernel = ConstantKernel::new(spec.agents, spec.rate)?;
            let space = enumerate_states(spec.agents, spec.total, spec.step)?;
            let f0 = ProbabilityField::delta(&space, &init)?;
            let (f, _) = evolve(&f0, &kernel, &space, steps, &Snapshots::None)?;
            (field_to_grid(&f, &space, units)?, space.len(), None)
        }
        Route::Fpe => {
            let config = SolverConfig {
                rate: spec.rate,
                total: spec.total,
                start: reduced,
                t0: 0.0,
                spacing: spec.spacing.unwrap_or(spec.step),
                time_step: None,
                horizon: spec.time,
                snapshots: vec![],
            };
            let g = match spec.agents {
                2 => DensityGrid::Line(solve_1d(&config)?.pop().expect("final snapshot")),
                3 => DensityGrid::Triangle(solve_2d(&config)?.pop().expect("final snapshot")),
                n => return Err(Error::UnsupportedAgents(n)),
            };
            let nodes = g.node_masses().len();
            (g, nodes, None)
        }
        Route::Analytic => {
            let cells = units;
            let g = match spec.agents {
                2 => {
                    let d = match symmetric_diffusion(2, spec.rate)? {
                        ReducedDiffusion::Line(d) => d,
                        ReducedDiffusion::Plane(_) => unreachable!(),
                    };
                    DensityGrid::Line(image_solution_1d(spec.x0[0], spec.time, 0.0, spec.total, d)?.cell_grid(cells))
                }
                3 => DensityGrid::Triangle(
                    composite_solution_2d([spec.x0[0], spec.x0[1]], spec.time, 0.0, spec.total, spec.rate)?.to_grid(cells)?,
                ),
                n => return Err(Error::UnsupportedAgents(n)),
            };
            let nodes = g.node_masses().len();
            (g, nodes, None)
        }
    };
    let moments = grid_moments(&grid);
    Ok((
        grid,
        RouteSummary {
            route,
            size,
            moments,
            noise,
        },
    ))
}

pub fn compare(spec: &CompareSpec) -> Result<ComparisonReport> {
    let units = WealthState::new(&spec.x0, spec.step)?.total_units() as usize;
    let (a, sa) = route_grid(spec.routes[0], spec)?;
    let (b, sb) = route_grid(spec.routes[1], spec)?;
    let cells = spec.cells.unwrap_or_else(|| default_cells(spec, units)).min(a.cells()).min(b.cells());
    let a = coarsen_to(a, cells)?;
    let b = coarsen_to(b, cells)?;
    let metrics = distance(&a, &b)?;
    let tolerances = spec
        .tolerances
        .clone()
        .unwrap_or_else(|| default_tolerances(spec.routes[0], spec.routes[1]));
    Ok(ComparisonReport::new([sa, sb], spec.time, spec.step, cells, metrics, &tolerances))
}

/// Scaled-chain histograms against the sticky image solution for a
/// decreasing sequence of lattice steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub steps: Vec<f64>,
    pub total: f64,
    pub rate: f64,
    /// Starting `x1`.
    pub x0: f64,
    pub horizon: f64,
    pub count: usize,
    pub master_seed: u64,
    /// Comparison grid; defaults to bins of twice the coarsest step.
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub step: f64,
    pub report: ComparisonReport,
    /// Variance of `x1` over runs not yet absorbed.
    pub pre_absorption_variance: Option<f64>,
}

pub fn convergence_study(spec: &ConvergenceSpec) -> Result<Vec<ConvergencePoint>> {
    if spec.steps.is_empty() {
        return Err(Error::InvalidConfig("no lattice steps given".into()));
    }
    if spec.steps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidConfig(format!("lattice steps {:?} must decrease", spec.steps)));
    }
    let coarsest = spec.steps[0];
    let default_cells = (spec.total / (2.0 * coarsest)).round().max(1.0) as usize;
    let cells = spec.cells.unwrap_or(default_cells);
    let mut out = Vec::with_capacity(spec.steps.len());
    for &l in &spec.steps {
        let init = WealthState::new(&[spec.x0, spec.total - spec.x0], l)
            .map_err(|e| Error::InvalidConfig(format!("inadmissible step {l}: {e}")))?;
        let units = init.total_units() as usize;
        if !units.is_multiple_of(cells) {
            return Err(Error::InvalidConfig(format!(
                "inadmissible step {l}: {units} lattice cells do not aggregate onto {cells}"
            )));
        }
        let steps = matched_steps(spec.horizon, l)?;
        let kernel = ConstantKernel::new(2, spec.rate)?;
        let ens = run_ensemble(&init, &kernel, steps, spec.count, spec.master_seed, Recording::FinalOnly)?;
        let chain = histogram(&ens, steps, cells)?;
        let d = match symmetric_diffusion(2, spec.rate)? {
            ReducedDiffusion::Line(d) => d,
            ReducedDiffusion::Plane(_) => unreachable!(),
        };
        let exact = DensityGrid::Line(image_solution_1d(spec.x0, spec.horizon, 0.0, spec.total, d)?.cell_grid(cells));
        let metrics = distance(&chain, &exact)?;
        let summary = |route, grid: &DensityGrid, size, noise| RouteSummary {
            route,
            size,
            moments: grid_moments(grid),
            noise,
        };
        let report = ComparisonReport::new(
            [
                summary(Route::Mc, &chain, spec.count, Some(tv_noise(&chain, spec.count))),
                summary(Route::Analytic, &exact, cells + 1, None),
            ],
            spec.horizon,
            l,
            cells,
            metrics,
            &[],
        );
        out.push(ConvergencePoint {
            step: l,
            report,
            pre_absorption_variance: pre_absorption_variance(&ens, steps).ok(),
        });
    }
    Ok(out)
}

/// Whether TV is nonincreasing along the study, allowing `sigmas` combined
/// Monte Carlo standard errors between neighbours.
pub fn trend_within_noise(points: &[ConvergencePoint], sigmas: f64) -> bool {
    points.windows(2).all(|w| {
        let n0 = w[0].report.routes[0].noise.unwrap_or(0.0);
        let n1 = w[1].report.routes[0].noise.unwrap_or(0.0);
        w[1].report.metrics.tv <= w[0].report.metrics.tv + sigmas * (n0 * n0 + n1 * n1).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_ensemble;

    fn line(masses: &[f64]) -> DensityGrid {
        DensityGrid::Line(LineGrid::from_node_masses(2.0, masses, 0.0))
    }

    #[test]
    fn distance_examples() {
        let u = line(&[1.0 / 3.0; 3]);
        let d = line(&[0.0, 1.0, 0.0]);
        let m = distance(&u, &d).unwrap();
        assert!((m.tv - 2.0 / 3.0).abs() < 1e-15);
        let a = line(&[1.0, 0.0, 0.0]);
        let b = line(&[0.0, 0.0, 1.0]);
        assert_eq!(distance(&a, &b).unwrap().tv, 1.0);
        assert_eq!(distance(&a, &b).unwrap().ks, Some(1.0));
        let m = distance(&u, &u).unwrap();
        assert_eq!((m.tv, m.l1_interior, m.boundary_discrepancy, m.ks), (0.0, 0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn incompatible_domains() {
        let a = line(&[1.0, 0.0, 0.0]);
        let t = DensityGrid::Triangle(TriangleGrid::zeros(2.0, 2, 0.0));
        assert!(matches!(distance(&a, &t), Err(Error::IncompatibleDomains(_))));
        let b = DensityGrid::Line(LineGrid::from_node_masses(3.0, &[1.0, 0.0, 0.0, 0.0], 0.0));
        assert!(distance(&a, &b).is_err());
    }

    #[test]
    fn time_matching() {
        assert_eq!(matched_steps(1.0, 0.1).unwrap(), 100);
        assert_eq!(matched_steps(50.0, 1.0).unwrap(), 50);
        assert!(matches!(matched_steps(1.005, 0.1), Err(Error::TimeMismatch(_))));
    }

    #[test]
    fn histogram_of_a_corner_start() {
        let init = WealthState::new(&[0.0, 10.0], 1.0).unwrap();
        let k = ConstantKernel::new(2, 0.5).unwrap();
        let ens = run_ensemble(&init, &k, 5, 10, 1, Recording::FinalOnly).unwrap();
        let g = histogram(&ens, 5, 10).unwrap();
        match g {
            DensityGrid::Line(l) => assert_eq!(l.atoms, [1.0, 0.0]),
            _ => panic!(),
        }
    }

    #[test]
    fn histogram_of_two_interior_runs() {
        let init = WealthState::new(&[3.0, 7.0], 1.0).unwrap();
        let k = ConstantKernel::new(2, 0.5).unwrap();
        let ens = run_ensemble(&init, &k, 1, 2, 0, Recording::FinalOnly).unwrap();
        let g = histogram(&ens, 0, 10).unwrap();
        assert_eq!(g.node_masses()[3], 1.0);
        let mut ens2 = ens.clone();
        ens2.trajectories[1].states[0].1 = WealthState::new(&[5.0, 5.0], 1.0).unwrap();
        let g = histogram(&ens2, 0, 10).unwrap();
        let m = g.node_masses();
        assert_eq!((m[3], m[5]), (0.5, 0.5));
        assert_eq!(g.total_mass(), 1.0);
    }

    #[test]
    fn route_parsing() {
        assert_eq!("MC".parse::<Route>().unwrap(), Route::Mc);
        assert!("x".parse::<Route>().is_err());
    }
}
