//! Python bindings, importable as `wex`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wex_core::analytic;
use wex_core::fpe::{self, ReducedDiffusion, SolverConfig};
use wex_core::grid::DensityGrid;
use wex_core::harness::{self, CompareSpec, Route};
use wex_core::kernel::{KernelSpec, RateKernel};
use wex_core::master::{enumerate_states, evolve, ProbabilityField, Snapshots};
use wex_core::model::WealthState;
use wex_core::sim::{run_ensemble, Recording};

fn err(e: wex_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kernel(spec: Option<&str>, agents: usize) -> PyResult<std::sync::Arc<dyn RateKernel>> {
    let text = spec
        .map(str::to_string)
        .unwrap_or_else(|| format!("constant({})", 1.0 / (agents * (agents - 1)) as f64));
    KernelSpec::parse(&text).and_then(|k| k.build(agents)).map_err(err)
}

/// `(u, v)`: probabilities of ending at `x1 = 0` and at `x1 = total`.
#[pyfunction]
fn absorption_split(total: f64, x0: f64) -> PyResult<(f64, f64)> {
    let s = analytic::absorption_split(total, x0).map_err(err)?;
    Ok((s.u, s.v))
}

/// Diffusion matrix of the reduced symmetric equation (1x1 or 2x2).
#[pyfunction]
fn symmetric_diffusion(agents: usize, rate: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(match fpe::symmetric_diffusion(agents, rate).map_err(err)? {
        ReducedDiffusion::Line(d) => vec![vec![d]],
        ReducedDiffusion::Plane(d) => d.iter().map(|r| r.to_vec()).collect(),
    })
}

/// Final states and absorption events of `count` seeded trajectories.
#[pyfunction]
#[pyo3(signature = (x0, t_max, count, seed=0, step=1.0, kernel_spec=None))]
fn simulate<'py>(
    py: Python<'py>,
    x0: Vec<f64>,
    t_max: u64,
    count: usize,
    seed: u64,
    step: f64,
    kernel_spec: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let init = WealthState::new(&x0, step).map_err(err)?;
    let k = kernel(kernel_spec, init.agents())?;
    let ens = py
        .detach(|| run_ensemble(&init, k.as_ref(), t_max, count, seed, Recording::FinalOnly))
        .map_err(err)?;
    let finals: Vec<Vec<f64>> = ens.trajectories.iter().map(|t| t.final_state().wealth_vec()).collect();
    let steps: Vec<Option<u64>> = ens.trajectories.iter().map(|t| t.absorbed_at.map(|a| a.step)).collect();
    let corners: Vec<Option<usize>> = ens.trajectories.iter().map(|t| t.absorbed_at.map(|a| a.corner)).collect();
    let out = PyDict::new(py);
    out.set_item("final", finals)?;
    out.set_item("absorbed_step", steps)?;
    out.set_item("corner", corners)?;
    Ok(out)
}

/// `(states, probabilities)` after `steps` applications of the master equation.
#[pyfunction]
#[pyo3(signature = (x0, steps, step=1.0, kernel_spec=None))]
fn evolve_master(
    py: Python<'_>,
    x0: Vec<f64>,
    steps: u64,
    step: f64,
    kernel_spec: Option<&str>,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let init = WealthState::new(&x0, step).map_err(err)?;
    let k = kernel(kernel_spec, init.agents())?;
    let space = enumerate_states(init.agents(), init.total_units() as f64 * step, step).map_err(err)?;
    let f0 = ProbabilityField::delta(&space, &init).map_err(err)?;
    let (f, _) = py
        .detach(|| evolve(&f0, k.as_ref(), &space, steps, &Snapshots::None))
        .map_err(err)?;
    let states = (0..space.len()).map(|i| space.state(i).wealth_vec()).collect();
    Ok((states, f.mass))
}

fn grid_dict<'py>(py: Python<'py>, g: &DensityGrid) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("time", g.time())?;
    out.set_item("coordinates", g.node_coordinates())?;
    out.set_item("masses", g.node_masses())?;
    out.set_item("boundary", g.is_boundary_node())?;
    Ok(out)
}

/// Finite-difference solution at `t0 + horizon`; node coordinates and masses.
#[pyfunction]
#[pyo3(signature = (rate, total, start, horizon, spacing, time_step=None, t0=0.0))]
#[allow(clippy::too_many_arguments)]
fn solve_fpe<'py>(
    py: Python<'py>,
    rate: f64,
    total: f64,
    start: Vec<f64>,
    horizon: f64,
    spacing: f64,
    time_step: Option<f64>,
    t0: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = SolverConfig {
        rate,
        total,
        start,
        t0,
        spacing,
        time_step,
        horizon,
        snapshots: vec![],
    };
    let grid = py
        .detach(|| -> wex_core::Result<DensityGrid> {
            Ok(match config.start.len() {
                1 => DensityGrid::Line(fpe::solve_1d(&config)?.pop().expect("horizon is kept")),
                _ => DensityGrid::Triangle(fpe::solve_2d(&config)?.pop().expect("horizon is kept")),
            })
        })
        .map_err(err)?;
    grid_dict(py, &grid)
}

/// Two-agent density with sticky ends, by images.
#[pyclass(frozen)]
struct ImageSolution(analytic::ImageSolution1d);

#[pymethods]
impl ImageSolution {
    #[new]
    #[pyo3(signature = (x0, t, total, diffusion, t0=0.0))]
    fn new(x0: f64, t: f64, total: f64, diffusion: f64, t0: f64) -> PyResult<Self> {
        analytic::image_solution_1d(x0, t, t0, total, diffusion).map(Self).map_err(err)
    }

    fn density(&self, x: f64) -> f64 {
        self.0.density(x)
    }

    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.0.interval_mass(a, b)
    }

    /// `(mass at 0, mass at total)`.
    fn atoms(&self) -> (f64, f64) {
        let [a, b] = self.0.atoms();
        (a, b)
    }

    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }
}

/// Three-agent density on the triangle with elastic edges and sticky corners.
#[pyclass(frozen)]
struct CompositeSolution(analytic::CompositeSolution2d);

#[pymethods]
impl CompositeSolution {
    #[new]
    #[pyo3(signature = (x0, t, total, rate, t0=0.0))]
    fn new(x0: (f64, f64), t: f64, total: f64, rate: f64, t0: f64) -> PyResult<Self> {
        analytic::composite_solution_2d([x0.0, x0.1], t, t0, total, rate)
            .map(Self)
            .map_err(err)
    }

    fn density(&self, x1: f64, x2: f64) -> f64 {
        self.0.density([x1, x2])
    }

    /// Indexed by the agent holding everything.
    fn corner_atoms(&self) -> [f64; 3] {
        self.0.corner_atoms()
    }

    /// Mass on the faces `x1 = 0`, `x2 = 0`, `x3 = 0`.
    fn edge_masses(&self) -> [f64; 3] {
        self.0.edge_masses()
    }

    fn interior_mass(&self) -> f64 {
        self.0.interior_mass()
    }

    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    #[getter]
    fn image_count(&self) -> usize {
        self.0.image_count()
    }
}

/// Comparison report of two routes (`mc`, `master`, `fpe`, `analytic`).
#[pyfunction]
#[pyo3(signature = (routes, x0, t, rate, step=1.0, count=100_000, seed=0, cells=None))]
#[allow(clippy::too_many_arguments)]
fn compare<'py>(
    py: Python<'py>,
    routes: (String, String),
    x0: Vec<f64>,
    t: f64,
    rate: f64,
    step: f64,
    count: usize,
    seed: u64,
    cells: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let parse = |s: &str| s.parse::<Route>().map_err(err);
    let spec = CompareSpec {
        routes: [parse(&routes.0)?, parse(&routes.1)?],
        agents: x0.len(),
        total: x0.iter().sum(),
        step,
        x0,
        rate,
        time: t,
        count,
        master_seed: seed,
        spacing: None,
        cells,
        tolerances: None,
    };
    let report = py.detach(|| harness::compare(&spec)).map_err(err)?;
    let text = serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pymodule]
fn wex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", wex_core::VERSION)?;
    m.add_function(wrap_pyfunction!(absorption_split, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_diffusion, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_master, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fpe, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_class::<ImageSolution>()?;
    m.add_class::<CompositeSolution>()?;
    Ok(())
}
