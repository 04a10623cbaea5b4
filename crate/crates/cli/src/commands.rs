//! One function per subcommand. Each resolves the blocks it needs (filling
//! defaults back into the config so the manifest records them), runs the
//! route and writes its artifacts.

use std::fmt;
use std::io::Write;

use serde::Serialize;
use wex_core::analytic::{absorption_split, composite_solution_2d, image_solution_1d};
use wex_core::export;
use wex_core::fpe::{self, ReducedDiffusion, SolverConfig};
use wex_core::grid::{DensityGrid, LineGrid, TriangleGrid};
use wex_core::harness::{self, CompareSpec, ConvergenceSpec, Metric, Route, Tolerance};
use wex_core::master::{enumerate_states, evolve, ProbabilityField, Snapshots};
use wex_core::sim::{hitting_statistics, run_ensemble, Recording};

use crate::config::{ConfigError, Model, RunConfig, Solver};
use crate::output::Artifacts;

#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Core(wex_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "invalid config: {e}"),
            CommandError::Core(e) => write!(f, "{e}"),
            CommandError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e)
    }
}

impl From<wex_core::Error> for CommandError {
    fn from(e: wex_core::Error) -> Self {
        use wex_core::Error as E;
        let at = |path: &str, e: &E| CommandError::Config(ConfigError::new(path, e.to_string()));
        match &e {
            E::Cfl { .. } => at("solver.tau", &e),
            E::OffGrid(_) => at("model.x0", &e),
            E::StateSpaceTooLarge { .. } => at("model.l", &e),
            E::InvalidKernel(_) => at("model.kernel", &e),
            _ => CommandError::Core(e),
        }
    }
}

pub type CommandResult = Result<bool, CommandError>;

pub const COMMANDS: [&str; 6] = ["simulate", "evolve-master", "solve-fpe", "analytic", "compare", "converge"];

/// Runs `command`; `Ok(false)` means a tolerance check failed.
pub fn dispatch(command: &str, config: &mut RunConfig, out: &mut Artifacts) -> CommandResult {
    match command {
        "simulate" => simulate(config, out),
        "evolve-master" => evolve_master(config, out),
        "solve-fpe" => solve_fpe(config, out),
        "analytic" => analytic(config, out),
        "compare" => compare(config, out),
        "converge" => converge(config, out),
        other => Err(ConfigError::new("command", format!("unknown command `{other}`; expected one of {COMMANDS:?}")).into()),
    }
}

fn short(x: f64) -> String {
    let s = format!("{:.10}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

pub fn simulate(config: &mut RunConfig, out: &mut Artifacts) -> CommandResult {
    let model = config.model.resolve()?;
    let count = config.ensemble.count(1000)?;
    let seed = config.ensemble.seed();
    let t_max = *config.ensemble.t_max.get_or_insert(1000);
    let recording = match *config.ensemble.record_every.get_or_insert(1) {
        0 => Recording::FinalOnly,
        1 => Recording::Full,
        k => Recording::Every(k),
    };
    let ens = run_ensemble(&model.state(), model.kernel.as_ref(), t_max, count, seed, recording)?;
    export::write_trajectories(out.create("trajectories.csv")?, &ens)?;
    export::write_absorptions(out.create("absorptions.csv")?, &ens)?;
    let corners: Vec<usize> = (0..model.agents).collect();
    let mut stats = hitting_statistics(&ens, &corners)?;
    stats.targets.iter_mut().for_each(|t| t.corner += 1);
    out.write_json("hitting.json", &stats)?;
    println!("runs={} t_max={t_max} kernel={}", stats.runs, model.kernel.label());
    for s in &stats.targets {
        println!(
            "corner {}: p={} se={}",
            s.corner,
            short(s.probability),
            short(s.standard_error)
        );
    }
    println!("unabsorbed={}", short(stats.remainder));
    Ok(true)
}

fn write_grids(out: &mut Artifacts, grids: &[DensityGrid]) -> Result<(), CommandError> {
    let times: Vec<f64> = grids.iter().map(DensityGrid::time).collect();
    let boundary: Vec<_> = grids.iter().map(export::boundary_masses).collect();
    match grids.last() {
        Some(DensityGrid::Line(_)) => {
            let lines: Vec<LineGrid> = grids
                .iter()
                .filter_map(|g| match g {
                    DensityGrid::Line(l) => Some(l.clone()),
                    _ => None,
                })
                .collect();
            export::write_line_grids(out.create("density.csv")?, &lines)?;
            out.plot_1d("density.csv", &times)?;
        }
        Some(DensityGrid::Triangle(last)) => {
            let tris: Vec<TriangleGrid> = grids
                .iter()
                .filter_map(|g| match g {
                    DensityGrid::Triangle(t) => Some(t.clone()),
                    _ => None,
                })
                .collect();
            export::write_triangle_grids(out.create("density.csv")?, &tris)?;
            export::write_triangle_matrix(out.create("matrix.csv")?, last)?;
            out.plot_triangle("density.csv", last.time, last.total)?;
        }
        None => {}
    }
    out.write_json("boundary.json", &boundary)?;
    Ok(())
}

pub fn evolve_master(config: &mut RunConfig, out: &mut Artifacts) -> CommandResult {
    let model = config.model.resolve()?;
    let steps = *config.master.steps.get_or_insert(100);
    let mut keep: Vec<u64> = match config.master.every {
        Some(0) => return Err(ConfigError::new("master.every", "must be at least 1").into()),
        Some(k) => (0..=steps).step_by(k as usize).collect(),
        None => std::iter::once(0)
            .chain(std::iter::successors(Some(1u64), |t| t.checked_mul(2)).take_while(|&t| t <= steps))
            .collect(),
    };
    if keep.last() != Some(&steps) {
        keep.push(steps);
    }
    let space = enumerate_states(model.agents, model.total, model.step)?;
    let f0 = ProbabilityField::delta(&space, &model.state())?;
    let (_, fields) = evolve(&f0, model.kernel.as_ref(), &space, steps, &Snapshots::At(keep))?;
    export::write_fields(out.create("fields.csv")?, &space, &fields)?;

    let mut w = out.create("corners.csv")?;
    let corner_cols: Vec<String> = (1..=model.agents).map(|i| format!("corner{i}")).collect();
    writeln!(w, "step,time,{},total", corner_cols.join(","))?;
    for f in &fields {
        let masses: Vec<String> = f.corner_masses(&space).iter().map(f64::to_string).collect();
        let time = f.time as f64 * model.step * model.step;
        writeln!(w, "{},{time},{},{}", f.time, masses.join(","), f.total())?;
    }
    w.flush()?;
    drop(w);

    if model.agents <= 3 {
        let cells = space.total_units() as usize;
        let grids = fields
            .iter()
            .map(|f| harness::field_to_grid(f, &space, cells))
            .collect::<wex_core::Result<Vec<_>>>()?;
        write_grids(out, &grids)?;
    }
    let last = fields.last().expect("final step is kept");
    println!("states={} steps={steps} mass={}", space.len(), short(last.total()));
    let corners: Vec<String> = last.corner_masses(&space).iter().map(|&m| short(m)).collect();
    println!("corners={}", corners.join(","));
    Ok(true)
}

fn solver_config(model: &Model, solver: &Solver) -> Result<SolverConfig, ConfigError> {
    Ok(SolverConfig {
        rate: model.rate()?,
        total: model.total,
        start: model.x0[..model.agents - 1].to_vec(),
        t0: solver.t0,
        spacing: solver.spacing,
        time_step: solver.time_step,
        horizon: solver.horizon,
        snapshots: solver.snapshots.clone(),
    })
}

pub fn solve_fpe(config: &mut RunConfig, out: &mut Artifacts) -> CommandResult {
    let model = config.model.resolve()?;
    model.require_agents(&[2, 3])?;
    let solver = config.solver.resolve(&model)?;
    let sc = solver_config(&model, &solver)?;
    let grids: Vec<DensityGrid> = if model.agents == 2 {
        fpe::solve_1d(&sc)?.into_iter().map(DensityGrid::Line).collect()
    } else {
        fpe::solve_2d(&sc)?.into_iter().map(DensityGrid::Triangle).collect()
    };
    write_grids(out, &grids)?;
    report_grid(grids.last().expect("horizon is kept"));
    Ok(true)
}

fn report_grid(g: &DensityGrid) {
    let b = export::boundary_masses(g);
    println!("t={} cells={} mass={}", short(b.time), g.cells(), short(g.total_mass()));
    if let Some([a, c]) = b.atoms {
        println!("atoms: x1=0 {} x1=N {}", short(a), short(c));
    }
    if let Some(c) = b.corners {
        let c: Vec<String> = c.iter().map(|&m| short(m)).collect();
        println!("corners={}", c.join(","));
    }
}

#[derive(Serialize)]
struct Absorption {
    agents: usize,
    total: f64,
    x0: Vec<f64>,
    /// Probability that agent `i` ends up holding everything.
    corners: Vec<f64>,
}

pub fn analytic(config: &mut RunConfig, out: &mut Artifacts) -> CommandResult {
    let model = config.model.resolve()?;
    if *config.analytic.absorption.get_or_insert(false) {
        model.rate()?;
        let corners = if model.agents == 2 {
            let split = absorption_split(model.total, model.x0[0])?;
            println!("u={} v={}", short(split.u), short(split.v));
            vec![split.v, split.u]
        } else {
            let p: Vec<f64> = model.x0.iter().map(|x| x / model.total).collect();
            let text: Vec<String> = p.iter().enumerate().map(|(i, v)| format!("p{}={}", i + 1, short(*v))).collect();
            println!("{}", text.join(" "));
            p
        };
        out.write_json(
            "absorption.json",
            &Absorption {
                agents: model.agents,
                total: model.total,
                x0: model.x0.clone(),
                corners,
            },
        )?;
        return Ok(true);
    }
    model.require_agents(&[2, 3])?;
    let solver = config.solver.resolve(&model)?;
    let rate = model.rate()?;
    let mut elapsed = solver.snapshots.clone();
    elapsed.push(solver.horizon);
    elapsed.sort_by(f64::total_cmp);
    elapsed.dedup();
    let grids = elapsed
        .iter()
        .map(|&dt| {
            let t = solver.t0 + dt;
            Ok(match fpe::symmetric_diffusion(model.agents, rate)? {
                ReducedDiffusion::Line(d) => {
                    DensityGrid::Line(image_solution_1d(model.x0[0], t, solver.t0, model.total, d)?.cell_grid(solver.cells))
                }
                ReducedDiffusion::Plane(_) => DensityGrid::Triangle(
                    composite_solution_2d([model.x0[0], model.x0[1]], t, solver.t0, model.total, rate)?
                        .to_grid(solver.cells)?,
                ),
            })
        })
        .collect::<wex_core::Result<Vec<_>>>()?;
    write_grids(out, &grids)?;
    report_grid(grids.last().expect("horizon is kept"));
    Ok(true)
}

fn tolerances(routes: [Route; 2], given: Option<&std::collections::BTreeMap<String, f64>>) -> Result<Vec<Tolerance>, ConfigError> {
    let mut list = harness::default_tolerances(routes[0], routes[1]);
    for (name, &limit) in given.into_iter().flatten() {
        let path = format!("compare.tolerances.{name}");
        let metric: Metric = name.parse().map_err(|e: wex_core::Error| ConfigError::new(&path, e.to_string()))?;
        if !(limit >= 0.0) {
            return Err(ConfigError::new(path, format!("limit must be nonnegative, got {limit}")));
        }
        match list.iter_mut().find(|t| t.metric == metric) {
            Some(t) => t.limit = limit,
            None => list.push(Tolerance { metric, limit }),
        }
    }
    Ok(list)
}

pub fn compare(config: &mut RunConfig, out: &mut Artifacts) -> CommandResult {
    let model = config.model.resolve()?;
    let rate = model.rate()?;
    let names = config
        .compare
        .routes
        .get_or_insert_with(|| vec!["mc".into(), "master".into()])
        .clone();
    let routes: Vec<Route> = names
        .iter()
        .map(|r| r.parse().map_err(|e: wex_core::Error| ConfigError::new("compare.routes", e.to_string())))
        .collect::<Result<_, _>>()?;
    let routes: [Route; 2] = routes
        .try_into()
        .map_err(|r: Vec<Route>| ConfigError::new("compare.routes", format!("need exactly two routes, got {}", r.len())))?;
    let time = config
        .compare
        .t
        .ok_or_else(|| ConfigError::new("compare.t", "required"))?;
    if !(time > 0.0) {
        return Err(ConfigError::new("compare.t", format!("must be positive, got {time}")).into());
    }
    let count = config.ensemble.count(100_000)?;
    let spec = CompareSpec {
        routes,
        agents: model.agents,
        total: model.total,
        step: model.step,
        x0: model.x0.clone(),
        rate,
        time,
        count,
        master_seed: config.ensemble.seed(),
        spacing: config.solver.h,
        cells: config.compare.cells,
        tolerances: Some(tolerances(routes, config.compare.tolerances.as_ref())?),
    };
    harness::matched_steps(time, model.step).map_err(|e| ConfigError::new("compare.t", e.to_string()))?;
    let report = harness::compare(&spec)?;
    out.write_json("report.json", &report)?;
    let text = report.to_text();
    out.write_text("report.txt", &text)?;
    print!("{text}");
    Ok(report.pass)
}

#[derive(Serialize)]
struct ConvergeReport<'a> {
    sigmas: f64,
    trend_within_noise: bool,
    points: &'a [harness::ConvergencePoint],
}

pub fn converge(config: &mut RunConfig, out: &mut Artifacts) -> CommandResult {
    let model = config.model.resolve()?;
    model.require_agents(&[2])?;
    let rate = model.rate()?;
    let steps = config
        .converge
        .steps
        .get_or_insert_with(|| vec![1.0, 0.5, 0.25])
        .clone();
    let horizon = *config.solver.horizon.get_or_insert(1.0);
    let sigmas = *config.converge.sigmas.get_or_insert(2.0);
    let spec = ConvergenceSpec {
        steps,
        total: model.total,
        rate,
        x0: model.x0[0],
        horizon,
        count: config.ensemble.count(20_000)?,
        master_seed: config.ensemble.seed(),
        cells: config.converge.cells,
    };
    let points = harness::convergence_study(&spec).map_err(|e| match e {
        wex_core::Error::InvalidConfig(m) => CommandError::Config(ConfigError::new("converge.steps", m)),
        other => other.into(),
    })?;
    export::write_convergence(out.create("convergence.csv")?, &points)?;
    let trend = harness::trend_within_noise(&points, sigmas);
    out.write_json(
        "report.json",
        &ConvergeReport {
            sigmas,
            trend_within_noise: trend,
            points: &points,
        },
    )?;
    for p in &points {
        let var = p.pre_absorption_variance.map_or("-".into(), short);
        println!(
            "l={} tv={} noise={} var={var}",
            short(p.step),
            short(p.report.metrics.tv),
            p.report.routes[0].noise.map_or("-".into(), short)
        );
    }
    println!("trend within {sigmas} sigma: {}", if trend { "yes" } else { "no" });
    Ok(true)
}
