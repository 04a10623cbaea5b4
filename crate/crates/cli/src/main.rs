//! `wex`: run the wealth-exchange routes from the command line.
//!
//! Exit status: 0 on success, 1 when `compare` fails a tolerance, 2 on a
//! usage or config error, 3 on any other failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CommandError;
use config::RunConfig;
use output::Artifacts;

#[derive(Parser, Debug)]
#[command(name = "wex", version, about = "Competitive wealth exchange: simulate, evolve, solve and compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo trajectories and absorption statistics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
    },
    /// Exact evolution of the probability mass over the lattice.
    EvolveMaster {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Keep every k-th step (default: 0, 1, 2, 4, 8, ...).
        #[arg(long)]
        every: Option<u64>,
    },
    /// Finite-difference Fokker-Planck solution on the segment or triangle.
    SolveFpe {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Closed-form densities and absorption probabilities.
    Analytic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Print the eventual absorption probabilities only.
        #[arg(long)]
        absorption: bool,
    },
    /// Distance between two routes at one time, checked against tolerances.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Two of mc, master, fpe, analytic.
        #[arg(long, value_delimiter = ',')]
        routes: Option<Vec<String>>,
        /// Continuum time; the lattice routes run t / l^2 steps.
        #[arg(long)]
        t: Option<f64>,
        /// Finite-difference spacing for the fpe route.
        #[arg(long)]
        h: Option<f64>,
        /// Cells of the comparison grid.
        #[arg(long)]
        cells: Option<usize>,
        /// Tolerance override, e.g. `tv=0.01` (repeatable).
        #[arg(long = "tol", value_parser = parse_tolerance)]
        tolerances: Vec<(String, f64)>,
    },
    /// Scaled-chain histograms against the exact solution as l shrinks.
    Converge {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Decreasing lattice steps.
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<f64>>,
        /// Continuum time of the comparison.
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        /// Allowed rise in TV between neighbours, in standard errors.
        #[arg(long)]
        sigmas: Option<f64>,
    },
    /// Run the command named in a config file or manifest.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON or TOML config (a run manifest also works); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $WEX_OUTPUT_DIR or ./wex-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Number of agents.
    #[arg(long = "n")]
    agents: Option<usize>,
    /// Total wealth.
    #[arg(long = "N")]
    total: Option<f64>,
    /// Lattice step.
    #[arg(long = "l")]
    step: Option<f64>,
    /// Initial holdings, all n or the first n - 1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// `constant(c)` or a JSON kernel table.
    #[arg(long, conflicts_with = "rate")]
    kernel: Option<String>,
    /// Shorthand for `--kernel 'constant(c)'`.
    #[arg(long = "c")]
    rate: Option<f64>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Steps per trajectory.
    #[arg(long)]
    t_max: Option<u64>,
    /// Keep every k-th state; 0 keeps only the initial and final states.
    #[arg(long)]
    record_every: Option<u64>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Grid spacing.
    #[arg(long)]
    h: Option<f64>,
    /// Time step (default: largest stable step dividing T).
    #[arg(long)]
    tau: Option<f64>,
    /// Elapsed time after t0.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    /// Extra elapsed times to keep.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected metric=limit")?;
    let value = value.parse().map_err(|_| format!("bad limit `{value}`"))?;
    Ok((name.trim().to_string(), value))
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

impl ModelArgs {
    fn apply(self, c: &mut RunConfig) {
        let m = &mut c.model;
        set(&mut m.agents, self.agents);
        set(&mut m.total, self.total);
        set(&mut m.step, self.step);
        set(&mut m.x0, self.x0);
        set(&mut m.kernel, self.kernel);
        set(&mut m.kernel, self.rate.map(|r| format!("constant({r})")));
    }
}

impl EnsembleArgs {
    fn apply(self, c: &mut RunConfig) {
        let e = &mut c.ensemble;
        set(&mut e.count, self.count);
        set(&mut e.seed, self.seed);
        set(&mut e.t_max, self.t_max);
        set(&mut e.record_every, self.record_every);
    }
}

impl SolverArgs {
    fn apply(self, c: &mut RunConfig) {
        let s = &mut c.solver;
        set(&mut s.h, self.h);
        set(&mut s.tau, self.tau);
        set(&mut s.horizon, self.horizon);
        set(&mut s.t0, self.t0);
        set(&mut s.snapshots, self.snapshots);
    }
}

/// Loads the config file and folds the flags over it.
fn assemble(command: Command) -> Result<(String, Common, RunConfig), config::ConfigError> {
    let (name, common) = match &command {
        Command::Simulate { common, .. } => ("simulate", common),
        Command::EvolveMaster { common, .. } => ("evolve-master", common),
        Command::SolveFpe { common, .. } => ("solve-fpe", common),
        Command::Analytic { common, .. } => ("analytic", common),
        Command::Compare { common, .. } => ("compare", common),
        Command::Converge { common, .. } => ("converge", common),
        Command::Run { common } => ("run", common),
    };
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let name = if name == "run" {
        cfg.command
            .clone()
            .ok_or_else(|| config::ConfigError::new("command", "required by `wex run`"))?
    } else {
        if let Some(file_cmd) = &cfg.command {
            if file_cmd != name {
                return Err(config::ConfigError::new(
                    "command",
                    format!("config is for `{file_cmd}` but `{name}` was invoked"),
                ));
            }
        }
        name.to_string()
    };
    let common = match command {
        Command::Simulate { common, model, ensemble } => {
            model.apply(&mut cfg);
            ensemble.apply(&mut cfg);
            common
        }
        Command::EvolveMaster { common, model, steps, every } => {
            model.apply(&mut cfg);
            set(&mut cfg.master.steps, steps);
            set(&mut cfg.master.every, every);
            common
        }
        Command::SolveFpe { common, model, solver } => {
            model.apply(&mut cfg);
            solver.apply(&mut cfg);
            common
        }
        Command::Analytic { common, model, solver, absorption } => {
            model.apply(&mut cfg);
            solver.apply(&mut cfg);
            if absorption {
                cfg.analytic.absorption = Some(true);
            }
            common
        }
        Command::Compare { common, model, ensemble, routes, t, h, cells, tolerances } => {
            model.apply(&mut cfg);
            ensemble.apply(&mut cfg);
            set(&mut cfg.compare.routes, routes);
            set(&mut cfg.compare.t, t);
            set(&mut cfg.solver.h, h);
            set(&mut cfg.compare.cells, cells);
            if !tolerances.is_empty() {
                cfg.compare.tolerances.get_or_insert_with(Default::default).extend(tolerances);
            }
            common
        }
        Command::Converge { common, model, ensemble, steps, horizon, cells, sigmas } => {
            model.apply(&mut cfg);
            ensemble.apply(&mut cfg);
            set(&mut cfg.converge.steps, steps);
            set(&mut cfg.solver.horizon, horizon);
            set(&mut cfg.converge.cells, cells);
            set(&mut cfg.converge.sigmas, sigmas);
            common
        }
        Command::Run { common } => common,
    };
    cfg.command = Some(name.clone());
    Ok((name, common, cfg))
}

fn run(command: Command) -> Result<bool, CommandError> {
    let (name, common, mut cfg) = assemble(command)?;
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(config::ConfigError::new("threads", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CommandError::Io(std::io::Error::other(e)))?;
    }
    let dir = output::output_dir(common.out.as_deref(), cfg.output_dir.as_deref());
    let mut artifacts = Artifacts::new(dir.clone(), &name)?;
    let pass = commands::dispatch(&name, &mut cfg, &mut artifacts)?;
    cfg.output_dir = Some(dir);
    let manifest = output::write_manifest(&artifacts, &cfg, if pass { "pass" } else { "fail" })?;
    eprintln!("manifest: {}", manifest.display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tolerance check failed");
            ExitCode::from(1)
        }
        Err(e @ CommandError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
