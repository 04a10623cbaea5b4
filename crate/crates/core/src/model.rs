//! States, jump vectors and per-state transition tables.
//!
//! Wealth lives on the lattice `l * Z`: every coordinate is stored as an
//! integer count of `l`-sized units, so jumps preserve the total exactly and
//! bankruptcy (`x_i == 0`) is an integer test.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::RateKernel;

/// Relative tolerance used when checking that a real wealth sits on the lattice.
pub const LATTICE_TOLERANCE: f64 = 1e-9;

/// Tolerance on `sum(nu) <= 1` and on table normalization.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Number of unordered agent pairs, `C(n, 2)`.
pub fn pair_count(agents: usize) -> usize {
    agents * agents.saturating_sub(1) / 2
}

/// Converts a real quantity to a whole number of lattice steps, rejecting
/// values that are not within `LATTICE_TOLERANCE` of a multiple of `step`.
pub fn to_units(value: f64, step: f64) -> Result<i64> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidState(format!("step must be positive, got {step}")));
    }
    if !value.is_finite() {
        return Err(Error::InvalidState(format!("wealth {value} is not finite")));
    }
    let ratio = value / step;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > LATTICE_TOLERANCE * rounded.abs().max(1.0) {
        return Err(Error::InvalidState(format!(
            "{value} is not an integer multiple of the step {step}"
        )));
    }
    Ok(rounded as i64)
}

/// A point of the conserved-wealth lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthState {
    units: Vec<i64>,
    step: f64,
}

impl WealthState {
    /// Builds a state from real wealths; each must be a nonnegative multiple of `step`.
    pub fn new(wealth: &[f64], step: f64) -> Result<Self> {
        let units = wealth
            .iter()
            .map(|&w| to_units(w, step))
            .collect::<Result<Vec<_>>>()?;
        Self::from_units(units, step)
    }

    pub fn from_units(units: Vec<i64>, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidState(format!("step must be positive, got {step}")));
        }
        if units.is_empty() {
            return Err(Error::InvalidState("state has no agents".into()));
        }
        if let Some(i) = units.iter().position(|&u| u < 0) {
            return Err(Error::InvalidState(format!("agent {i} has negative wealth")));
        }
        Ok(Self { units, step })
    }

    pub fn agents(&self) -> usize {
        self.units.len()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn units(&self) -> &[i64] {
        &self.units
    }

    pub fn wealth(&self, agent: usize) -> f64 {
        self.units[agent] as f64 * self.step
    }

    pub fn wealth_vec(&self) -> Vec<f64> {
        self.units.iter().map(|&u| u as f64 * self.step).collect()
    }

    pub fn total_units(&self) -> i64 {
        self.units.iter().sum()
    }

    pub fn is_bankrupt(&self, agent: usize) -> bool {
        self.units[agent] == 0
    }

    pub(crate) fn units_mut(&mut self) -> &mut [i64] {
        &mut self.units
    }
}

impl fmt::Display for WealthState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.wealth_vec().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, ")")
    }
}

/// Sum of all agent wealths.
pub fn total_wealth(state: &WealthState) -> f64 {
    state.total_units() as f64 * state.step
}

/// The jump `e_ij`: agent `gainer` takes one step of wealth from `loser`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JumpVector {
    pub gainer: usize,
    pub loser: usize,
}

impl JumpVector {
    pub fn new(gainer: usize, loser: usize) -> Result<Self> {
        if gainer == loser {
            return Err(Error::InvalidJump(format!(
                "agent {gainer} cannot compete against itself"
            )));
        }
        Ok(Self { gainer, loser })
    }

    /// `-e_ij = e_ji`.
    pub fn reversed(self) -> Self {
        Self {
            gainer: self.loser,
            loser: self.gainer,
        }
    }

    /// Dense form with `+1` at the gainer and `-1` at the loser.
    pub fn components(self, agents: usize) -> Vec<i64> {
        let mut v = vec![0; agents];
        v[self.gainer] = 1;
        v[self.loser] = -1;
        v
    }
}

/// Moves one lattice step of wealth from `jump.loser` to `jump.gainer`.
pub fn apply_jump(state: &WealthState, jump: JumpVector) -> Result<WealthState> {
    let mut next = state.clone();
    apply_jump_in_place(&mut next, jump)?;
    Ok(next)
}

pub(crate) fn apply_jump_in_place(state: &mut WealthState, jump: JumpVector) -> Result<()> {
    let n = state.agents();
    if jump.gainer >= n || jump.loser >= n || jump.gainer == jump.loser {
        return Err(Error::InvalidJump(format!(
            "jump {}->{} does not fit {n} agents",
            jump.loser, jump.gainer
        )));
    }
    let units = state.units_mut();
    if units[jump.loser] < 1 {
        return Err(Error::Underflow {
            loser: jump.loser,
            units: units[jump.loser],
        });
    }
    units[jump.loser] -= 1;
    units[jump.gainer] += 1;
    Ok(())
}

/// Boundary classification used to dispatch between interior, edge and
/// absorbing-corner dynamics. Agent indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateClass {
    Interior,
    /// Some agents are bankrupt but at least two still compete.
    Edge(Vec<usize>),
    /// Agent `k` holds all the wealth.
    Corner(usize),
}

pub fn classify_state(state: &WealthState) -> StateClass {
    let zeros: Vec<usize> = (0..state.agents())
        .filter(|&i| state.is_bankrupt(i))
        .collect();
    if zeros.is_empty() {
        return StateClass::Interior;
    }
    let alive: Vec<usize> = (0..state.agents())
        .filter(|&i| !state.is_bankrupt(i))
        .collect();
    match alive.as_slice() {
        [k] => StateClass::Corner(*k),
        _ => StateClass::Edge(zeros),
    }
}

/// One-step law of the chain from a fixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    /// All ordered pairs `(i, j)`, `i != j`, in lexicographic order.
    pub entries: Vec<(JumpVector, f64)>,
    pub stay_probability: f64,
}

impl TransitionTable {
    pub fn probability(&self, jump: JumpVector) -> f64 {
        self.entries
            .iter()
            .find(|(j, _)| *j == jump)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum::<f64>() + self.stay_probability
    }

    /// Inverse-CDF lookup for a uniform draw in `[0, 1)`; `None` means stay.
    pub fn sample(&self, uniform: f64) -> Option<JumpVector> {
        let mut acc = 0.0;
        for &(jump, p) in &self.entries {
            acc += p;
            if uniform < acc {
                return Some(jump);
            }
        }
        None
    }
}

/// Evaluates `nu_ij = kappa_ij / C(n, 2)` for every ordered pair and the
/// stay probability `1 - sum(nu)`.
pub fn build_transition_table(
    kernel: &dyn RateKernel,
    state: &WealthState,
) -> Result<TransitionTable> {
    let mut table = TransitionTable {
        entries: Vec::new(),
        stay_probability: 1.0,
    };
    fill_transition_table(kernel, state, &mut table)?;
    Ok(table)
}

pub(crate) fn fill_transition_table(
    kernel: &dyn RateKernel,
    state: &WealthState,
    table: &mut TransitionTable,
) -> Result<()> {
    let n = state.agents();
    if kernel.agents() != n {
        return Err(Error::DimensionMismatch {
            expected: kernel.agents(),
            found: n,
        });
    }
    let pairs = pair_count(n);
    table.entries.clear();
    let mut sum = 0.0;
    for gainer in 0..n {
        for loser in 0..n {
            if gainer == loser {
                continue;
            }
            let kappa = kernel.kappa(gainer, loser, state);
            if !(0.0..=1.0).contains(&kappa) {
                return Err(Error::InvalidKernel(format!(
                    "kappa[{gainer}][{loser}] = {kappa} outside [0, 1] at {state}"
                )));
            }
            let nu = kappa / pairs as f64;
            sum += nu;
            table.entries.push((JumpVector { gainer, loser }, nu));
        }
    }
    if sum > 1.0 + PROBABILITY_TOLERANCE {
        return Err(Error::InvalidKernel(format!(
            "transition probabilities sum to {sum} > 1 at {state}"
        )));
    }
    table.stay_probability = (1.0 - sum).max(0.0);
    Ok(())
}
