use wex_core::analytic::{
    absorption_split, boundary_weights, composite_solution_2d, edge_solutions, gaussian_1d, gaussian_2d,
    image_solution_1d, QuadraticForm,
};
use wex_core::grid::DensityGrid;
use wex_core::harness::{distance, field_to_grid};
use wex_core::kernel::ConstantKernel;
use wex_core::master::{enumerate_states, evolve, ProbabilityField, Snapshots};
use wex_core::model::WealthState;
use wex_core::sim::{hitting_statistics, run_ensemble, Recording};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn heat_kernel_mass_and_variance() {
    for &(c, tau) in &[(0.5f64, 1.0f64), (0.1, 3.0), (2.0, 0.25)] {
        // the Eq-15 normalisation corresponds to D = 4c
        let d = 4.0 * c;
        let span = 12.0 * (2.0 * d * tau).sqrt();
        let mass = simpson(|x| gaussian_1d(x, tau, 1.0, 0.0, d).unwrap(), 1.0 - span, 1.0 + span, 4000);
        let var = simpson(|x| (x - 1.0).powi(2) * gaussian_1d(x, tau, 1.0, 0.0, d).unwrap(), 1.0 - span, 1.0 + span, 4000);
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((var - 8.0 * c * tau).abs() < 1e-8 * var);
        let peak = gaussian_1d(1.0, tau, 1.0, 0.0, d).unwrap();
        assert!((peak - 1.0 / (16.0 * std::f64::consts::PI * c * tau).sqrt()).abs() < 1e-14);
    }
}

#[test]
fn heat_kernel_solves_the_diffusion_equation() {
    let d = 2.0;
    let (dx, dt) = (1e-3, 1e-5);
    for &t in &[0.5, 1.0, 3.0] {
        for &x in &[-2.0, 0.0, 0.7, 3.0] {
            let f = |x: f64, t: f64| gaussian_1d(x, t, 0.0, 0.0, d).unwrap();
            let fxx = (f(x + dx, t) - 2.0 * f(x, t) + f(x - dx, t)) / (dx * dx);
            let ft = (f(x, t + dt) - f(x, t - dt)) / (2.0 * dt);
            assert!((d * fxx - ft).abs() < 1e-4 * f(0.0, t), "x={x} t={t}");
        }
    }
}

#[test]
fn split_matches_monte_carlo() {
    let s = absorption_split(10.0, 3.0).unwrap();
    let init = WealthState::new(&[3.0, 7.0], 1.0).unwrap();
    let kernel = ConstantKernel::new(2, 0.5).unwrap();
    let ens = run_ensemble(&init, &kernel, 100_000, 100_000, 31, Recording::FinalOnly).unwrap();
    let stats = hitting_statistics(&ens, &[1, 0]).unwrap();
    assert!((stats.targets[0].probability - s.u).abs() < 0.005);
    assert!((stats.targets[1].probability - s.v).abs() < 0.005);
}

#[test]
fn image_solution_shape() {
    let sym = image_solution_1d(5.0, 2.0, 0.0, 10.0, 0.5).unwrap();
    let [a, b] = sym.atoms();
    assert!((a - b).abs() < 1e-14);
    for x in [0.5, 2.0, 4.5] {
        assert!((sym.density(x) - sym.density(10.0 - x)).abs() < 1e-14);
    }
    let s = image_solution_1d(3.0, 1.0, 0.0, 10.0, 0.5).unwrap();
    let r = image_solution_1d(7.0, 1.0, 0.0, 10.0, 0.5).unwrap();
    for x in [0.3, 1.0, 3.0, 6.5, 9.9] {
        assert!((s.density(x) - r.density(10.0 - x)).abs() < 1e-14);
    }
    assert_eq!(s.atoms(), [r.atoms()[1], r.atoms()[0]]);
}

#[test]
fn image_solution_vanishes_at_the_walls_and_keeps_mass() {
    for &tau in &[0.1, 0.5, 1.0, 3.0, 10.0] {
        let s = image_solution_1d(3.0, tau, 0.0, 10.0, 0.5).unwrap();
        let peak = (1..1000).map(|i| s.density(i as f64 * 0.01)).fold(0.0, f64::max);
        for x in [1e-9, 10.0 - 1e-9] {
            assert!(s.density(x).abs() < 0.02 * peak);
        }
        let quad = simpson(|x| s.density(x), 0.0, 10.0, 20_000);
        let [a, b] = s.atoms();
        assert!((quad + a + b - 1.0).abs() < 1e-6, "tau {tau}: {}", quad + a + b);
        assert!((0..=100).all(|i| s.density(i as f64 * 0.1) >= 0.0));
    }
}

#[test]
fn image_solution_matches_the_master_equation() {
    let kernel = ConstantKernel::new(2, 0.5).unwrap();
    let space = enumerate_states(2, 10.0, 0.1).unwrap();
    let init = WealthState::new(&[3.0, 7.0], 0.1).unwrap();
    let f0 = ProbabilityField::delta(&space, &init).unwrap();
    let (f, _) = evolve(&f0, &kernel, &space, 200, &Snapshots::None).unwrap();
    // bins of two lattice steps absorb the walk's parity
    let master = field_to_grid(&f, &space, 50).unwrap();
    let exact = image_solution_1d(3.0, 2.0, 0.0, 10.0, 0.5).unwrap().cell_grid(50);
    let tv = distance(&master, &DensityGrid::Line(exact)).unwrap().tv;
    assert!(tv < 0.05, "{tv}");
}

#[test]
fn bivariate_kernel() {
    let form = QuadraticForm::symmetric(0.5).unwrap();
    let x0 = [4.0, 3.0];
    let peak = gaussian_2d(x0, 1.0, x0, 0.0, &form).unwrap();
    for dx in [[0.1, 0.0], [0.0, -0.1], [0.1, 0.1], [-0.1, 0.1]] {
        assert!(gaussian_2d([x0[0] + dx[0], x0[1] + dx[1]], 1.0, x0, 0.0, &form).unwrap() < peak);
    }
    let mass = simpson(
        |x| simpson(|y| gaussian_2d([x, y], 1.0, x0, 0.0, &form).unwrap(), -8.0, 14.0, 600),
        -6.0,
        14.0,
        600,
    );
    assert!((mass - 1.0).abs() < 1e-8, "{mass}");
}

#[test]
fn boundary_weight_cases() {
    let w = boundary_weights([4.0, 3.0, 3.0]);
    assert_eq!((w.edges, w.corners), ([0.0; 3], [0.0; 3]));
    let w = boundary_weights([4.0, 0.0, 6.0]);
    assert_eq!((w.edges, w.corners), ([0.0, 1.0, 0.0], [0.0; 3]));
    let w = boundary_weights([0.0, 10.0, 0.0]);
    assert_eq!((w.edges, w.corners), ([0.0; 3], [0.0, 1.0, 0.0]));
}

#[test]
fn edge_solutions_are_conditional_laws() {
    let edges = edge_solutions([5.0, 5.0], 3.0, 0.0, 10.0, 0.25);
    assert!(edges.is_err(), "x3 = 0 is not interior");
    let edges = edge_solutions([5.0, 2.0], 3.0, 0.0, 10.0, 0.25).unwrap();
    for e in &edges {
        assert!((e.solution.total_mass() - 1.0).abs() < 1e-12);
    }
    // edges 1 and 2 use x1 = 5, the midpoint
    let [a, b] = edges[1].solution.atoms();
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn composite_mass_and_corner_start() {
    let sol = composite_solution_2d([4.0, 3.0], 3.0, 0.0, 10.0, 1.0 / 6.0).unwrap();
    assert!((sol.total_mass() - 1.0).abs() < 1e-4);
    assert_eq!(sol.weights.edges, [0.0; 3]);
    assert_eq!(sol.weights.corners, [0.0; 3]);
    let corner = composite_solution_2d([0.0, 10.0], 3.0, 0.0, 10.0, 1.0 / 6.0).unwrap();
    assert_eq!(corner.corner_atoms(), [0.0, 1.0, 0.0]);
    assert_eq!(corner.total_mass(), 1.0);
}

#[test]
fn composite_edge_density_matches_runs_on_that_edge() {
    let c = 1.0 / 6.0;
    let t = 6.0;
    let l = 0.1;
    let init = WealthState::new(&[4.0, 3.0, 3.0], l).unwrap();
    let kernel = ConstantKernel::new(3, c).unwrap();
    let steps = (t / (l * l)).round() as u64;
    let ens = run_ensemble(&init, &kernel, steps, 100_000, 41, Recording::FinalOnly).unwrap();
    let bins = 10;
    let mut mc = vec![0.0; bins];
    for tr in &ens.trajectories {
        let u = tr.final_state().units();
        if u[0] == 0 && u[1] > 0 && u[2] > 0 {
            mc[((u[1] as usize) * bins / 100).min(bins - 1)] += 1.0;
        }
    }
    let on_edge: f64 = mc.iter().sum();
    assert!(on_edge > 1000.0);
    let grid = composite_solution_2d([4.0, 3.0], t, 0.0, 10.0, c).unwrap().to_grid(100).unwrap();
    let mut exact = vec![0.0; bins];
    for s in 1..100 {
        exact[(s * bins / 100).min(bins - 1)] += grid.edges[0][s];
    }
    let total: f64 = exact.iter().sum();
    let tv = 0.5
        * mc.iter()
            .zip(&exact)
            .map(|(a, b)| (a / on_edge - b / total).abs())
            .sum::<f64>();
    assert!(tv < 0.08, "{tv}");
    // the edge holds the same share of mass in both
    let share = on_edge / ens.trajectories.len() as f64;
    assert!((share - total * grid.spacing()).abs() < 0.01, "{share} vs {}", total * grid.spacing());
}
