//! Monte Carlo simulation of the discrete-time chain.
//!
//! Each trajectory owns a ChaCha8 stream seeded from `(master seed, index)`,
//! so ensembles are reproducible and independent of the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::RateKernel;
use crate::model::{
    apply_jump, apply_jump_in_place, classify_state, fill_transition_table, StateClass,
    TransitionTable, WealthState,
};

/// Which intermediate states a trajectory keeps. The initial and final
/// states and the absorption step are always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recording {
    Full,
    Every(u64),
    FinalOnly,
}

impl Recording {
    fn keeps(self, step: u64) -> bool {
        match self {
            Recording::Full => true,
            Recording::Every(k) => k > 0 && step.is_multiple_of(k),
            Recording::FinalOnly => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Absorption {
    pub step: u64,
    pub corner: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub t_max: u64,
    /// Recorded `(step, state)` pairs in increasing step order.
    pub states: Vec<(u64, WealthState)>,
    pub absorbed_at: Option<Absorption>,
}

impl Trajectory {
    pub fn initial(&self) -> &WealthState {
        &self.states[0].1
    }

    /// State at `t_max`; for absorbed runs this is the corner.
    pub fn final_state(&self) -> &WealthState {
        &self.states.last().expect("trajectory holds its initial state").1
    }

    /// State at step `t`, if it was recorded or the run had already frozen at a corner.
    pub fn state_at(&self, t: u64) -> Option<&WealthState> {
        if t > self.t_max {
            return None;
        }
        if let Some(abs) = self.absorbed_at {
            if t >= abs.step {
                return Some(self.final_state());
            }
        }
        self.states
            .binary_search_by_key(&t, |(s, _)| *s)
            .ok()
            .map(|i| &self.states[i].1)
    }
}

/// Draws one transition of the chain.
pub fn step<R: Rng + ?Sized>(
    state: &WealthState,
    kernel: &dyn RateKernel,
    rng: &mut R,
) -> Result<WealthState> {
    let table = crate::model::build_transition_table(kernel, state)?;
    match table.sample(rng.random::<f64>()) {
        Some(jump) => apply_jump(state, jump),
        None => Ok(state.clone()),
    }
}

/// SplitMix64 mix of the master seed and the trajectory index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_trajectory(
    init: &WealthState,
    kernel: &dyn RateKernel,
    t_max: u64,
    recording: Recording,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = TransitionTable {
        entries: Vec::new(),
        stay_probability: 1.0,
    };
    let mut current = init.clone();
    let mut states = vec![(0, init.clone())];

    if let StateClass::Corner(corner) = classify_state(init) {
        return Ok(Trajectory {
            seed,
            t_max,
            states,
            absorbed_at: Some(Absorption { step: 0, corner }),
        });
    }

    let mut absorbed_at = None;
    let mut last = 0;
    for t in 1..=t_max {
        fill_transition_table(kernel, &current, &mut table)?;
        if let Some(jump) = table.sample(rng.random::<f64>()) {
            apply_jump_in_place(&mut current, jump)?;
            if let StateClass::Corner(corner) = classify_state(&current) {
                absorbed_at = Some(Absorption { step: t, corner });
                last = t;
                break;
            }
        }
        last = t;
        if t < t_max && recording.keeps(t) {
            states.push((t, current.clone()));
        }
    }
    if last > 0 {
        states.push((last, current));
    }
    Ok(Trajectory {
        seed,
        t_max,
        states,
        absorbed_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub kernel: String,
    pub step: f64,
    pub t_max: u64,
    pub master_seed: u64,
    pub count: usize,
    pub recording: Recording,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub trajectories: Vec<Trajectory>,
    pub config: EnsembleConfig,
}

pub fn run_ensemble(
    init: &WealthState,
    kernel: &dyn RateKernel,
    t_max: u64,
    count: usize,
    master_seed: u64,
    recording: Recording,
) -> Result<TrajectoryEnsemble> {
    if count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let trajectories = (0..count as u64)
        .into_par_iter()
        .map(|i| run_trajectory(init, kernel, t_max, recording, derive_seed(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryEnsemble {
        trajectories,
        config: EnsembleConfig {
            kernel: kernel.label(),
            step: init.step(),
            t_max,
            master_seed,
            count,
            recording,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub corner: usize,
    pub count: usize,
    pub probability: f64,
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub standard_error: f64,
    /// Mean absorption step among runs absorbed at this corner.
    pub mean_absorption_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingStats {
    pub runs: usize,
    pub targets: Vec<TargetStats>,
    /// Fraction of runs not absorbed at any of the targets by `t_max`.
    pub remainder: f64,
}

pub fn hitting_statistics(ensemble: &TrajectoryEnsemble, targets: &[usize]) -> Result<HittingStats> {
    if targets.is_empty() {
        return Err(Error::InvalidConfig("no hitting targets given".into()));
    }
    let runs = ensemble.trajectories.len();
    if runs == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let agents = ensemble.trajectories[0].initial().agents();
    if let Some(&bad) = targets.iter().find(|&&k| k >= agents) {
        return Err(Error::OutOfRange(format!("corner {bad} with {agents} agents")));
    }
    let n = runs as f64;
    let stats: Vec<TargetStats> = targets
        .iter()
        .map(|&corner| {
            let steps: Vec<u64> = ensemble
                .trajectories
                .iter()
                .filter_map(|t| t.absorbed_at)
                .filter(|a| a.corner == corner)
                .map(|a| a.step)
                .collect();
            let count = steps.len();
            let p = count as f64 / n;
            TargetStats {
                corner,
                count,
                probability: p,
                standard_error: (p * (1.0 - p) / n).sqrt(),
                mean_absorption_step: (count > 0)
                    .then(|| steps.iter().map(|&s| s as f64).sum::<f64>() / count as f64),
            }
        })
        .collect();
    let absorbed: f64 = stats.iter().map(|s| s.probability).sum();
    Ok(HittingStats {
        runs,
        targets: stats,
        remainder: (1.0 - absorbed).max(0.0),
    })
}
