//! Consumption kernels `kappa_ij(x)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pair_count, WealthState, PROBABILITY_TOLERANCE};

/// Probability that `gainer` consumes a step of `loser`'s wealth once the
/// pair has been selected. Implementations must return `0` on the diagonal.
pub trait RateKernel: Send + Sync + fmt::Debug {
    fn agents(&self) -> usize;

    fn kappa(&self, gainer: usize, loser: usize, state: &WealthState) -> f64;

    /// Short identifier used in ensemble configs and manifests.
    fn label(&self) -> String;

    /// `Some(c)` when `nu_ij = c` for every competing pair, which is the only
    /// case the continuum and closed-form routes handle.
    fn symmetric_rate(&self) -> Option<f64> {
        None
    }
}

/// The symmetric constant kernel: `nu_ij = c` whenever `x_i x_j > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantKernel {
    agents: usize,
    rate: f64,
}

impl ConstantKernel {
    /// `rate` is the per-step probability `nu_ij`; admissible when
    /// `2 * rate * C(n, 2) <= 1`, i.e. `rate <= 1 / (n (n - 1))`.
    pub fn new(agents: usize, rate: f64) -> Result<Self> {
        if agents < 2 {
            return Err(Error::InvalidKernel(format!(
                "need at least two agents, got {agents}"
            )));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidKernel(format!("rate {rate} must be >= 0")));
        }
        let limit = 1.0 / (agents * (agents - 1)) as f64;
        if rate > limit + PROBABILITY_TOLERANCE {
            return Err(Error::InvalidKernel(format!(
                "rate {rate} exceeds {limit}, the largest admissible value for {agents} agents"
            )));
        }
        Ok(Self { agents, rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl RateKernel for ConstantKernel {
    fn agents(&self) -> usize {
        self.agents
    }

    fn kappa(&self, gainer: usize, loser: usize, state: &WealthState) -> f64 {
        if gainer == loser || state.is_bankrupt(gainer) || state.is_bankrupt(loser) {
            0.0
        } else {
            self.rate * pair_count(self.agents) as f64
        }
    }

    fn label(&self) -> String {
        format!("constant({})", self.rate)
    }

    fn symmetric_rate(&self) -> Option<f64> {
        Some(self.rate)
    }
}

/// Functional form of one `kappa_ij` entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaForm {
    Constant(f64),
    /// `kappa_ij = coef * x_j`.
    ProportionalToLoser(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableEntry {
    gainer: usize,
    loser: usize,
    form: KappaForm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableFile {
    agents: usize,
    #[serde(default = "default_true")]
    bankruptcy: bool,
    entries: Vec<TableEntry>,
}

fn default_true() -> bool {
    true
}

/// Table-driven kernel; pairs without an entry never interact.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    agents: usize,
    entries: BTreeMap<(usize, usize), KappaForm>,
    bankruptcy: bool,
}

impl TableKernel {
    pub fn new(agents: usize, entries: Vec<(usize, usize, KappaForm)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (gainer, loser, form) in entries {
            if gainer >= agents || loser >= agents {
                return Err(Error::InvalidKernel(format!(
                    "entry ({gainer}, {loser}) out of range for {agents} agents"
                )));
            }
            if gainer == loser {
                return Err(Error::InvalidKernel(format!(
                    "self-competition entry ({gainer}, {loser})"
                )));
            }
            match form {
                KappaForm::Constant(k) if !(0.0..=1.0).contains(&k) => {
                    return Err(Error::InvalidKernel(format!(
                        "kappa[{gainer}][{loser}] = {k} outside [0, 1]"
                    )))
                }
                KappaForm::ProportionalToLoser(coef) if !(coef.is_finite() && coef >= 0.0) => {
                    return Err(Error::InvalidKernel(format!(
                        "coefficient {coef} for ({gainer}, {loser}) must be >= 0"
                    )))
                }
                _ => {}
            }
            if map.insert((gainer, loser), form).is_some() {
                return Err(Error::InvalidKernel(format!(
                    "duplicate entry ({gainer}, {loser})"
                )));
            }
        }
        for (&(i, j), form) in &map {
            if let (KappaForm::Constant(a), Some(KappaForm::Constant(b))) = (form, map.get(&(j, i))) {
                if a + b > 1.0 + PROBABILITY_TOLERANCE {
                    return Err(Error::InvalidKernel(format!(
                        "kappa[{i}][{j}] + kappa[{j}][{i}] = {} > 1",
                        a + b
                    )));
                }
            }
        }
        Ok(Self {
            agents,
            entries: map,
            bankruptcy: true,
        })
    }

    /// Every ordered pair gets the same constant `kappa`.
    pub fn uniform(agents: usize, kappa: f64) -> Result<Self> {
        let entries = (0..agents)
            .flat_map(|i| (0..agents).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (i, j, KappaForm::Constant(kappa)))
            .collect();
        Self::new(agents, entries)
    }

    /// Disables the zero-on-bankruptcy rule. Such kernels are only usable by
    /// the simulation and master-equation routes, and jumps out of an empty
    /// agent surface as [`Error::Underflow`].
    pub fn without_bankruptcy_rule(mut self) -> Self {
        self.bankruptcy = false;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text)?;
        let kernel = Self::new(
            file.agents,
            file.entries
                .into_iter()
                .map(|e| (e.gainer, e.loser, e.form))
                .collect(),
        )?;
        Ok(if file.bankruptcy {
            kernel
        } else {
            kernel.without_bankruptcy_rule()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TableFile {
            agents: self.agents,
            bankruptcy: self.bankruptcy,
            entries: self
                .entries
                .iter()
                .map(|(&(gainer, loser), &form)| TableEntry { gainer, loser, form })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

impl RateKernel for TableKernel {
    fn agents(&self) -> usize {
        self.agents
    }

    fn kappa(&self, gainer: usize, loser: usize, state: &WealthState) -> f64 {
        if self.bankruptcy && (state.is_bankrupt(gainer) || state.is_bankrupt(loser)) {
            return 0.0;
        }
        match self.entries.get(&(gainer, loser)) {
            None => 0.0,
            Some(KappaForm::Constant(k)) => *k,
            Some(KappaForm::ProportionalToLoser(coef)) => coef * state.wealth(loser),
        }
    }

    fn label(&self) -> String {
        format!("table({} entries)", self.entries.len())
    }

    fn symmetric_rate(&self) -> Option<f64> {
        let n = self.agents;
        if !self.bankruptcy || self.entries.len() != n * (n - 1) {
            return None;
        }
        let mut value = None;
        for form in self.entries.values() {
            match (form, value) {
                (KappaForm::Constant(k), None) => value = Some(*k),
                (KappaForm::Constant(k), Some(v)) if *k == v => {}
                _ => return None,
            }
        }
        value.map(|k| k / pair_count(n) as f64)
    }
}

/// Kernel selection as written in configs: `constant(c)` or a path to a JSON
/// table.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Constant(f64),
    Table(TableKernel),
}

impl KernelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(inner) = text
            .strip_prefix("constant(")
            .and_then(|rest| rest.strip_suffix(')'))
        {
            let rate: f64 = inner.trim().parse().map_err(|_| {
                Error::InvalidKernel(format!("cannot parse rate in `{text}`"))
            })?;
            return Ok(Self::Constant(rate));
        }
        if text.ends_with(".json") {
            return Self::load(text);
        }
        Err(Error::InvalidKernel(format!(
            "unknown kernel `{text}`; expected constant(c) or a .json table"
        )))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::Table(TableKernel::from_json(&text)?))
    }

    pub fn build(&self, agents: usize) -> Result<Arc<dyn RateKernel>> {
        match self {
            Self::Constant(rate) => Ok(Arc::new(ConstantKernel::new(agents, *rate)?)),
            Self::Table(table) => {
                if table.agents() != agents {
                    return Err(Error::DimensionMismatch {
                        expected: agents,
                        found: table.agents(),
                    });
                }
                Ok(Arc::new(table.clone()))
            }
        }
    }
}
