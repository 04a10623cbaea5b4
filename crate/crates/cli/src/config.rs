//! Run configuration: file blocks, flag overrides and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wex_core::kernel::{KernelSpec, RateKernel};
use wex_core::model::WealthState;

/// A validation failure tied to a field of the config, e.g. `model.x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub model: ModelBlock,
    pub solver: SolverBlock,
    pub ensemble: EnsembleBlock,
    pub master: MasterBlock,
    pub analytic: AnalyticBlock,
    pub compare: CompareBlock,
    pub converge: ConvergeBlock,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "n")]
    pub agents: Option<usize>,
    #[serde(rename = "N")]
    pub total: Option<f64>,
    #[serde(rename = "l")]
    pub step: Option<f64>,
    /// `constant(c)` or a path to a JSON kernel table.
    pub kernel: Option<String>,
    /// Either all `n` holdings or the first `n - 1`.
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub h: Option<f64>,
    pub tau: Option<f64>,
    /// Elapsed time after `t0`.
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub t0: Option<f64>,
    /// Extra elapsed times to keep.
    pub snapshots: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleBlock {
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub t_max: Option<u64>,
    /// Keep every k-th state; 0 keeps only the initial and final states.
    pub record_every: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterBlock {
    pub steps: Option<u64>,
    /// Snapshot cadence; unset keeps steps 0, 1, 2, 4, 8, ...
    pub every: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticBlock {
    pub absorption: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareBlock {
    pub routes: Option<Vec<String>>,
    pub t: Option<f64>,
    pub cells: Option<usize>,
    /// Metric name (`tv`, `l1`, `boundary`, `ks`) to limit.
    pub tolerances: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeBlock {
    pub steps: Option<Vec<f64>>,
    pub cells: Option<usize>,
    pub sigmas: Option<f64>,
}

fn parse_error(e: serde_path_to_error::Error<impl fmt::Display>) -> ConfigError {
    let path = e.path().to_string();
    let path = if path == "." { "config".to_string() } else { path };
    ConfigError::new(path, e.inner().to_string())
}

impl RunConfig {
    /// Reads a JSON or TOML config. A run manifest is accepted too, in which
    /// case its recorded config is used.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        if is_toml {
            Self::from_toml(&text)
        } else {
            Self::from_json(&text).or_else(|json_err| {
                if path.extension().is_some_and(|e| e == "json") {
                    Err(json_err)
                } else {
                    Self::from_toml(&text).map_err(|_| json_err)
                }
            })
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))?;
        if value.get("wex_manifest").is_some() {
            value = value
                .get_mut("config")
                .map(serde_json::Value::take)
                .ok_or_else(|| ConfigError::new("config", "manifest has no config"))?;
        }
        serde_path_to_error::deserialize(value).map_err(parse_error)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(parse_error)
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(path, format!("must be positive, got {v}")))
    }
}

/// Validated model block.
#[derive(Debug, Clone)]
pub struct Model {
    pub agents: usize,
    pub total: f64,
    pub step: f64,
    pub x0: Vec<f64>,
    pub kernel: Arc<dyn RateKernel>,
}

impl Model {
    pub fn state(&self) -> WealthState {
        WealthState::new(&self.x0, self.step).expect("validated when resolved")
    }

    /// `c` for the symmetric constant kernel, required by the continuum and
    /// closed-form routes.
    pub fn rate(&self) -> Result<f64, ConfigError> {
        self.kernel.symmetric_rate().ok_or_else(|| {
            ConfigError::new(
                "model.kernel",
                format!("`{}` is not a symmetric constant kernel", self.kernel.label()),
            )
        })
    }

    pub fn require_agents(&self, allowed: &[usize]) -> Result<(), ConfigError> {
        if allowed.contains(&self.agents) {
            Ok(())
        } else {
            Err(ConfigError::new(
                "model.n",
                format!("this command handles {allowed:?} agents, got {}", self.agents),
            ))
        }
    }
}

impl ModelBlock {
    /// Fills defaults in place and checks cross-field consistency.
    pub fn resolve(&mut self) -> Result<Model, ConfigError> {
        let step = positive("model.l", *self.step.get_or_insert(1.0))?;
        let mut x0 = self
            .x0
            .clone()
            .ok_or_else(|| ConfigError::new("model.x0", "required"))?;
        if x0.is_empty() {
            return Err(ConfigError::new("model.x0", "is empty"));
        }
        if let Some(bad) = x0.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ConfigError::new("model.x0", format!("holdings must be nonnegative, got {bad}")));
        }
        let agents = match self.agents {
            Some(n) => n,
            None if x0.len() >= 2 => x0.len(),
            None => 2,
        };
        if agents < 2 {
            return Err(ConfigError::new("model.n", format!("need at least two agents, got {agents}")));
        }
        let sum: f64 = x0.iter().sum();
        let total = match self.total {
            Some(total) => positive("model.N", total)?,
            None if x0.len() == agents => positive("model.N", sum)?,
            None => return Err(ConfigError::new("model.N", "required when x0 lists n - 1 holdings")),
        };
        if x0.len() + 1 == agents {
            if sum > total * (1.0 + 1e-12) {
                return Err(ConfigError::new("model.x0", format!("holdings sum to {sum}, above N = {total}")));
            }
            x0.push((total - sum).max(0.0));
        } else if x0.len() != agents {
            return Err(ConfigError::new(
                "model.x0",
                format!("has {} entries; expected n = {agents} or n - 1", x0.len()),
            ));
        }
        let sum: f64 = x0.iter().sum();
        if (sum - total).abs() > 1e-9 * total {
            return Err(ConfigError::new("model.x0", format!("holdings sum to {sum}, expected N = {total}")));
        }
        wex_core::model::to_units(total, step)
            .map_err(|e| ConfigError::new("model.l", format!("does not divide N: {e}")))?;
        WealthState::new(&x0, step).map_err(|e| ConfigError::new("model.x0", e.to_string()))?;
        let kernel_text = self
            .kernel
            .get_or_insert_with(|| format!("constant({})", 1.0 / (agents * (agents - 1)) as f64))
            .clone();
        let kernel = KernelSpec::parse(&kernel_text)
            .and_then(|spec| spec.build(agents))
            .map_err(|e| ConfigError::new("model.kernel", e.to_string()))?;
        self.agents = Some(agents);
        self.total = Some(total);
        self.x0 = Some(x0.clone());
        Ok(Model {
            agents,
            total,
            step,
            x0,
            kernel,
        })
    }
}

/// Validated solver block.
#[derive(Debug, Clone, PartialEq)]
pub struct Solver {
    pub spacing: f64,
    pub cells: usize,
    pub time_step: Option<f64>,
    pub horizon: f64,
    pub t0: f64,
    pub snapshots: Vec<f64>,
}

impl SolverBlock {
    /// Defaults: `h = 0.05` for two agents and `0.1` for three, `T = 1`.
    pub fn resolve(&mut self, model: &Model) -> Result<Solver, ConfigError> {
        let default_h = if model.agents == 2 { 0.05 } else { 0.1 };
        let spacing = positive("solver.h", *self.h.get_or_insert(default_h))?;
        let ratio = model.total / spacing;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 * ratio.max(1.0) || cells < 2.0 {
            return Err(ConfigError::new(
                "solver.h",
                format!("N / h = {ratio} must be an integer of at least 2"),
            ));
        }
        if let Some(tau) = self.tau {
            positive("solver.tau", tau)?;
        }
        let horizon = positive("solver.T", *self.horizon.get_or_insert(1.0))?;
        let t0 = *self.t0.get_or_insert(0.0);
        if !t0.is_finite() {
            return Err(ConfigError::new("solver.t0", "must be finite"));
        }
        let snapshots = self.snapshots.get_or_insert_with(Vec::new).clone();
        if let Some(bad) = snapshots.iter().find(|&&s| !(s > 0.0 && s <= horizon)) {
            return Err(ConfigError::new(
                "solver.snapshots",
                format!("{bad} is outside (0, T = {horizon}]"),
            ));
        }
        Ok(Solver {
            spacing,
            cells: cells as usize,
            time_step: self.tau,
            horizon,
            t0,
            snapshots,
        })
    }
}

impl EnsembleBlock {
    pub fn count(&mut self, default: usize) -> Result<usize, ConfigError> {
        match *self.count.get_or_insert(default) {
            0 => Err(ConfigError::new("ensemble.count", "must be at least 1")),
            n => Ok(n),
        }
    }

    pub fn seed(&mut self) -> u64 {
        *self.seed.get_or_insert(0)
    }
}
