use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wex_core::kernel::{ConstantKernel, KappaForm, TableKernel};
use wex_core::model::{build_transition_table, total_wealth, WealthState};
use wex_core::sim::{hitting_statistics, run_ensemble, step, Recording};

#[test]
fn one_step_law_matches_the_table() {
    let kernels = [
        (TableKernel::uniform(2, 0.45).unwrap(), vec![vec![2.0, 4.0], vec![1.0, 5.0]]),
        (TableKernel::uniform(3, 0.4).unwrap(), vec![vec![1.0, 2.0, 3.0], vec![0.0, 2.0, 4.0]]),
        (
            TableKernel::new(
                4,
                vec![
                    (0, 1, KappaForm::Constant(0.6)),
                    (1, 0, KappaForm::Constant(0.2)),
                    (2, 3, KappaForm::ProportionalToLoser(0.2)),
                    (3, 2, KappaForm::Constant(0.4)),
                    (0, 3, KappaForm::Constant(1.0)),
                ],
            )
            .unwrap(),
            vec![vec![1.0, 1.0, 2.0, 2.0], vec![3.0, 0.0, 1.0, 2.0]],
        ),
    ];
    let draws = 100_000;
    for (kernel, states) in kernels {
        for wealth in states {
            let state = WealthState::new(&wealth, 1.0).unwrap();
            let table = build_transition_table(&kernel, &state).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let mut counts = std::collections::HashMap::new();
            for _ in 0..draws {
                let next = step(&state, &kernel, &mut rng).unwrap();
                *counts.entry(next.units().to_vec()).or_insert(0usize) += 1;
            }
            let mut expected = vec![(state.units().to_vec(), table.stay_probability)];
            for &(jump, p) in &table.entries {
                let mut u = state.units().to_vec();
                u[jump.gainer] += 1;
                u[jump.loser] -= 1;
                expected.push((u, p));
            }
            for (units, p) in expected {
                let observed = *counts.get(&units).unwrap_or(&0) as f64 / draws as f64;
                let se = (p * (1.0 - p) / draws as f64).sqrt().max(1e-12);
                assert!((observed - p).abs() <= 4.0 * se + 1e-12, "{units:?}: {observed} vs {p}");
            }
        }
    }
}

#[test]
fn gambler_ruin_within_three_standard_errors() {
    let kernel = ConstantKernel::new(2, 0.5).unwrap();
    for x0 in [2.0, 3.0, 5.0, 8.0] {
        let init = WealthState::new(&[x0, 10.0 - x0], 1.0).unwrap();
        let ens = run_ensemble(&init, &kernel, 10_000, 20_000, x0 as u64, Recording::FinalOnly).unwrap();
        let stats = hitting_statistics(&ens, &[1]).unwrap();
        let u = &stats.targets[0];
        let exact = (10.0 - x0) / 10.0;
        assert!((u.probability - exact).abs() <= 3.0 * u.standard_error, "x0={x0}: {}", u.probability);
    }
}

#[test]
fn wealth_is_conserved_along_trajectories() {
    let kernel = TableKernel::new(
        3,
        vec![
            (0, 1, KappaForm::Constant(0.5)),
            (1, 2, KappaForm::ProportionalToLoser(0.1)),
            (2, 0, KappaForm::Constant(0.3)),
        ],
    )
    .unwrap();
    let init = WealthState::new(&[2.5, 4.0, 3.5], 0.5).unwrap();
    let ens = run_ensemble(&init, &kernel, 500, 50, 4, Recording::Full).unwrap();
    for tr in &ens.trajectories {
        for (_, s) in &tr.states {
            assert_eq!(s.total_units(), 20);
            assert_eq!(total_wealth(s), 10.0);
            assert!(s.units().iter().all(|&u| u >= 0));
        }
    }
}

#[test]
fn ensemble_fraction_near_seventy_percent() {
    let init = WealthState::new(&[3.0, 7.0], 1.0).unwrap();
    let kernel = ConstantKernel::new(2, 0.5).unwrap();
    let ens = run_ensemble(&init, &kernel, 100_000, 100_000, 11, Recording::FinalOnly).unwrap();
    let stats = hitting_statistics(&ens, &[1, 0]).unwrap();
    assert!((stats.targets[0].probability - 0.7).abs() <= 0.005);
    assert_eq!(stats.remainder, 0.0);
    let mean = stats.targets[0].mean_absorption_step.unwrap();
    assert!(mean > 0.0);
}
