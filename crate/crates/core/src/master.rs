//! Exact evolution of the probability mass function over the finite
//! conserved-wealth lattice.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::RateKernel;
use crate::model::{build_transition_table, to_units, WealthState};

/// Largest state space `enumerate_states` will build.
pub const MAX_STATES: u128 = 10_000_000;

/// Below this size a step runs on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

/// All lattice points with `n` agents, total `N` and step `l`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    agents: usize,
    step: f64,
    total_units: i64,
    /// Flattened unit vectors, `agents` entries per state.
    units: Vec<i64>,
    index: HashMap<Vec<i64>, usize>,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of compositions of `units` into `agents` nonnegative parts.
pub fn state_count(agents: usize, units: i64) -> u128 {
    binomial(units as u128 + agents as u128 - 1, agents as u128 - 1)
}

pub fn enumerate_states(agents: usize, total: f64, step: f64) -> Result<StateSpace> {
    if agents == 0 {
        return Err(Error::InvalidState("state space needs at least one agent".into()));
    }
    let total_units = to_units(total, step)?;
    if total_units < 0 {
        return Err(Error::InvalidState(format!("total wealth {total} is negative")));
    }
    let size = state_count(agents, total_units);
    if size > MAX_STATES {
        return Err(Error::StateSpaceTooLarge {
            size,
            limit: MAX_STATES,
        });
    }
    let mut units = Vec::with_capacity(size as usize * agents);
    let mut current = vec![0i64; agents];
    compositions(&mut current, 0, total_units, &mut units);
    let index = units
        .chunks(agents)
        .enumerate()
        .map(|(i, s)| (s.to_vec(), i))
        .collect();
    Ok(StateSpace {
        agents,
        step,
        total_units,
        units,
        index,
    })
}

// Lexicographically descending in the first coordinate.
fn compositions(current: &mut [i64], pos: usize, remaining: i64, out: &mut Vec<i64>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for u in (0..=remaining).rev() {
        current[pos] = u;
        compositions(current, pos + 1, remaining - u, out);
    }
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.units.len() / self.agents
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn total_units(&self) -> i64 {
        self.total_units
    }

    pub fn total(&self) -> f64 {
        self.total_units as f64 * self.step
    }

    pub fn units(&self, i: usize) -> &[i64] {
        &self.units[i * self.agents..(i + 1) * self.agents]
    }

    pub fn state(&self, i: usize) -> WealthState {
        WealthState::from_units(self.units(i).to_vec(), self.step).expect("enumerated states are valid")
    }

    pub fn index_of_units(&self, units: &[i64]) -> Option<usize> {
        self.index.get(units).copied()
    }

    pub fn index_of(&self, state: &WealthState) -> Option<usize> {
        if (state.step() - self.step).abs() > 1e-12 * self.step {
            return None;
        }
        self.index_of_units(state.units())
    }

    /// Index of the state where `agent` holds everything.
    pub fn corner_index(&self, agent: usize) -> usize {
        let mut u = vec![0; self.agents];
        u[agent] = self.total_units;
        self.index[&u]
    }
}

/// Probability mass aligned with a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    pub mass: Vec<f64>,
    pub time: u64,
}

impl ProbabilityField {
    pub fn delta(space: &StateSpace, state: &WealthState) -> Result<Self> {
        let i = space.index_of(state).ok_or_else(|| {
            Error::InvalidState(format!("{state} is not in the enumerated state space"))
        })?;
        let mut mass = vec![0.0; space.len()];
        mass[i] = 1.0;
        Ok(Self { mass, time: 0 })
    }

    pub fn uniform(space: &StateSpace) -> Self {
        let n = space.len();
        Self {
            mass: vec![1.0 / n as f64; n],
            time: 0,
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass at each corner, indexed by the agent holding all the wealth.
    pub fn corner_masses(&self, space: &StateSpace) -> Vec<f64> {
        (0..space.agents())
            .map(|k| self.mass[space.corner_index(k)])
            .collect()
    }

    /// Marginal law of one agent's wealth, indexed by units `0..=N/l`.
    pub fn marginal(&self, space: &StateSpace, agent: usize) -> Vec<f64> {
        let mut out = vec![0.0; space.total_units() as usize + 1];
        for (i, m) in self.mass.iter().enumerate() {
            out[space.units(i)[agent] as usize] += m;
        }
        out
    }
}

/// Sparse one-step operator in pull form: each state gathers from the
/// states that can jump into it.
#[derive(Debug, Clone)]
pub struct MasterOperator {
    stay: Vec<f64>,
    offsets: Vec<usize>,
    sources: Vec<(usize, f64)>,
}

impl MasterOperator {
    pub fn new(kernel: &dyn RateKernel, space: &StateSpace) -> Result<Self> {
        let n = space.len();
        let mut stay = vec![0.0; n];
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut target = vec![0i64; space.agents()];
        for (src, stay_slot) in stay.iter_mut().enumerate() {
            let state = space.state(src);
            let table = build_transition_table(kernel, &state)?;
            *stay_slot = table.stay_probability;
            for &(jump, p) in &table.entries {
                if p == 0.0 {
                    continue;
                }
                target.copy_from_slice(space.units(src));
                if target[jump.loser] < 1 {
                    return Err(Error::Underflow {
                        loser: jump.loser,
                        units: target[jump.loser],
                    });
                }
                target[jump.loser] -= 1;
                target[jump.gainer] += 1;
                let dst = space
                    .index_of_units(&target)
                    .expect("jumps preserve the total");
                incoming[dst].push((src, p));
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut sources = Vec::new();
        for list in incoming {
            sources.extend(list);
            offsets.push(sources.len());
        }
        Ok(Self {
            stay,
            offsets,
            sources,
        })
    }

    pub fn len(&self) -> usize {
        self.stay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stay.is_empty()
    }

    fn gather(&self, mass: &[f64], dst: usize) -> f64 {
        let gain: f64 = self.sources[self.offsets[dst]..self.offsets[dst + 1]]
            .iter()
            .map(|&(src, p)| p * mass[src])
            .sum();
        self.stay[dst] * mass[dst] + gain
    }

    pub fn apply(&self, field: &ProbabilityField) -> ProbabilityField {
        let mass = if self.len() >= PARALLEL_THRESHOLD {
            (0..self.len())
                .into_par_iter()
                .map(|dst| self.gather(&field.mass, dst))
                .collect()
        } else {
            (0..self.len())
                .map(|dst| self.gather(&field.mass, dst))
                .collect()
        };
        ProbabilityField {
            mass,
            time: field.time + 1,
        }
    }
}

/// One application of the master equation.
pub fn evolve_step(
    field: &ProbabilityField,
    kernel: &dyn RateKernel,
    space: &StateSpace,
) -> Result<ProbabilityField> {
    check_aligned(field, space)?;
    Ok(MasterOperator::new(kernel, space)?.apply(field))
}

fn check_aligned(field: &ProbabilityField, space: &StateSpace) -> Result<()> {
    if field.mass.len() != space.len() {
        return Err(Error::IncompatibleDomains(format!(
            "field has {} entries, state space has {}",
            field.mass.len(),
            space.len()
        )));
    }
    Ok(())
}

/// When [`evolve`] keeps intermediate fields.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshots {
    None,
    /// Steps 1, 2, 4, 8, ... up to the horizon.
    PowersOfTwo,
    Every(u64),
    At(Vec<u64>),
}

impl Snapshots {
    fn keeps(&self, t: u64) -> bool {
        match self {
            Snapshots::None => false,
            Snapshots::PowersOfTwo => t.is_power_of_two(),
            Snapshots::Every(k) => *k > 0 && t.is_multiple_of(*k),
            Snapshots::At(ts) => ts.contains(&t),
        }
    }
}

/// Applies the master equation `steps` times. Returns the final field and
/// any requested snapshots (including time 0 when it is selected).
pub fn evolve(
    field0: &ProbabilityField,
    kernel: &dyn RateKernel,
    space: &StateSpace,
    steps: u64,
    snapshots: &Snapshots,
) -> Result<(ProbabilityField, Vec<ProbabilityField>)> {
    check_aligned(field0, space)?;
    let op = MasterOperator::new(kernel, space)?;
    let mut kept = Vec::new();
    if matches!(snapshots, Snapshots::At(ts) if ts.contains(&field0.time))
        || matches!(snapshots, Snapshots::Every(_))
    {
        kept.push(field0.clone());
    }
    let mut field = field0.clone();
    for _ in 0..steps {
        field = op.apply(&field);
        if snapshots.keeps(field.time) {
            kept.push(field.clone());
        }
    }
    Ok((field, kept))
}
