use multicoag_core::composition::{Composition, RadialFn, WeightParams};
use multicoag_core::diagnostics::{
    direction_series, mass_conservation_residual, phi_moment_check, richardson_ratio,
    sublinear_moment_check, theta0, time_lipschitz_check, trajectory_distance, uniqueness_compare,
    weak_solution_residual,
};
use multicoag_core::grid::{simulate, GridSpec, SourceSpec, Truncation};
use multicoag_core::kernels::Kernel;
use multicoag_core::measures::SignedMeasure;
use multicoag_core::trajectory::Trajectory;

fn c(v: &[f64]) -> Composition<f64> {
    Composition::new(v.to_vec()).unwrap()
}

fn monomer() -> SignedMeasure<f64> {
    SignedMeasure::dirac(c(&[1.0]), 1.0)
}

fn constant_run(dt: f64, every: usize) -> Trajectory<f64> {
    let spec = GridSpec::new(1, 64, Truncation::Closed, dt, 1.0, every).unwrap();
    let k = Kernel::constant(2.0).unwrap();
    simulate(&spec, &k, &SourceSpec::none(1), &monomer()).unwrap()
}

fn closed_form(k: usize, t: f64) -> f64 {
    t.powi(k as i32 - 1) / (1.0 + t).powi(k as i32 + 1)
}

#[test]
fn conservation_passes_and_catches_injected_mass() {
    let f0 = SignedMeasure::new(2, vec![(c(&[1.0, 0.0]), 1.0), (c(&[0.0, 1.0]), 1.0)]).unwrap();
    let source = SourceSpec::from_atoms(2, vec![(c(&[1.0, 0.0]), 0.1)]).unwrap();
    let spec = GridSpec::new(2, 24, Truncation::Open, 0.01, 1.0, 10).unwrap();
    let mut traj = simulate(&spec, &Kernel::brownian(), &source, &f0).unwrap();
    let r = mass_conservation_residual(&traj, &f0, &source, 1e-10).unwrap();
    assert!(r.pass, "{}", r.summary_line());

    let last = traj.len() - 1;
    let slot = traj.lattice.index(&[0, 3]).unwrap();
    traj.snapshots[last].values[slot] += 1e-3;
    let r = mass_conservation_residual(&traj, &f0, &source, 1e-10).unwrap();
    assert!(!r.pass);
    assert_eq!(r.location.at.as_deref(), Some("component 2"));
    assert_eq!(r.location.t, Some(1.0));
    assert!((r.worst_violation - 3e-3).abs() < 1e-9);
}

#[test]
fn moment_bounds_on_constant_kernel() {
    let traj = constant_run(0.01, 10);
    let none = SourceSpec::none(1);
    let mass = sublinear_moment_check(
        &traj,
        &monomer(),
        &none,
        &WeightParams::new(1.0, 1.0),
        1e-10,
    )
    .unwrap();
    assert!(mass.pass, "{}", mass.summary_line());
    assert!(mass.worst_violation.abs() < 1e-10);

    let p = WeightParams::new(0.5, 0.9);
    let r = sublinear_moment_check(&traj, &monomer(), &none, &p, 1e-8).unwrap();
    assert!(r.pass, "{}", r.summary_line());
    // oracle: the closed-form moment at t = 1 sits strictly below the bound
    let exact: f64 = (1..=64)
        .map(|k| p.radial(k as f64) * closed_form(k, 1.0))
        .sum();
    let last = r.series.last().unwrap();
    assert!((last.value - exact).abs() < 1e-6);
    assert!(exact < 1.0);

    let square = RadialFn::power(2.0);
    let r = phi_moment_check(&traj, &monomer(), &none, &square, 1.0, 1e-8).unwrap();
    assert!(r.pass, "{}", r.summary_line());
    let zero = RadialFn::new("0", |_| 0.0);
    let r = phi_moment_check(&traj, &monomer(), &none, &zero, 1.0, 1e-8).unwrap();
    assert!(r.pass && r.worst_violation <= 0.0);

    assert!(
        sublinear_moment_check(&traj, &monomer(), &none, &WeightParams::new(1.5, 0.0), 1e-8)
            .is_err()
    );
}

#[test]
fn moment_check_flags_growth() {
    let mut traj = constant_run(0.01, 10);
    let last = traj.len() - 1;
    traj.snapshots[last].values[1] += 1.0;
    let r = sublinear_moment_check(
        &traj,
        &monomer(),
        &SourceSpec::none(1),
        &WeightParams::new(0.0, 0.0),
        1e-8,
    )
    .unwrap();
    assert!(!r.pass);
    assert_eq!(r.location.t, Some(1.0));
}

#[test]
fn time_lipschitz_examples() {
    let source = SourceSpec::from_atoms(1, vec![(c(&[2.0]), 0.1)]).unwrap();
    let spec = GridSpec::new(1, 8, Truncation::Closed, 0.1, 1.0, 1).unwrap();
    let p = WeightParams::new(0.0, 0.0);
    let traj = simulate(&spec, &Kernel::constant(0.0).unwrap(), &source, &monomer()).unwrap();
    let r = time_lipschitz_check(&traj, &p, 2.0).unwrap();
    assert!(r.pass);
    assert!((r.fitted.unwrap() - 0.1).abs() < 1e-12);

    let empty = SignedMeasure::empty(1);
    let traj = simulate(
        &spec,
        &Kernel::constant(2.0).unwrap(),
        &SourceSpec::none(1),
        &empty,
    )
    .unwrap();
    let r = time_lipschitz_check(&traj, &p, 2.0).unwrap();
    assert!(r.pass);
    assert_eq!(r.fitted, Some(0.0));

    let fine = time_lipschitz_check(&constant_run(0.005, 10), &p, 2.0).unwrap();
    let coarse = time_lipschitz_check(&constant_run(0.01, 10), &p, 2.0).unwrap();
    assert!(fine.pass && coarse.pass);
    let (a, b) = (fine.fitted.unwrap(), coarse.fitted.unwrap());
    assert!(a.is_finite() && (a / b - 1.0).abs() < 0.5);
}

#[test]
fn weak_residual_vanishes_without_coagulation() {
    let source = SourceSpec::from_atoms(1, vec![(c(&[2.0]), 0.3)]).unwrap();
    let spec = GridSpec::new(1, 8, Truncation::Closed, 0.1, 1.0, 1).unwrap();
    let k = Kernel::constant(0.0).unwrap();
    let traj = simulate(&spec, &k, &source, &monomer()).unwrap();
    let phi = |x: &Composition<f64>| x.l1_norm().min(2.0);
    let r = weak_solution_residual(&traj, &k, &monomer(), &source, &phi, 0.1).unwrap();
    assert!(r.pass);
    assert!(r.fitted.unwrap() < 1e-14);
}

#[test]
fn weak_residual_is_fourth_order() {
    let k = Kernel::constant(2.0).unwrap();
    let none = SourceSpec::none(1);
    let phi = |x: &Composition<f64>| x.l1_norm().min(2.0);
    let residual = |dt: f64| {
        let r =
            weak_solution_residual(&constant_run(dt, 1), &k, &monomer(), &none, &phi, dt).unwrap();
        assert!(r.pass, "{}", r.summary_line());
        r.fitted.unwrap()
    };
    let (coarse, fine) = (residual(0.05), residual(0.025));
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn weak_residual_additive_matches_conservation() {
    let traj = constant_run(0.05, 4);
    let k = Kernel::constant(2.0).unwrap();
    let none = SourceSpec::none(1);
    let coord = |x: &Composition<f64>| x.coords()[0];
    let weak = weak_solution_residual(&traj, &k, &monomer(), &none, &coord, 0.05).unwrap();
    let mass = mass_conservation_residual(&traj, &monomer(), &none, 1e-12).unwrap();
    assert!(weak.fitted.unwrap() < 1e-13 && mass.worst_violation < 1e-13);
    assert!(weak.context.contains("trapezoid"));
}

#[test]
fn weak_residual_rejects_uneven_spacing() {
    let mut traj = constant_run(0.05, 2);
    traj.snapshots.swap_remove(3);
    let phi = |x: &Composition<f64>| x.l1_norm().min(2.0);
    let k = Kernel::constant(2.0).unwrap();
    assert!(
        weak_solution_residual(&traj, &k, &monomer(), &SourceSpec::none(1), &phi, 0.05).is_err()
    );
}

#[test]
fn uniqueness_same_config_different_workers() {
    let f0 = SignedMeasure::new(2, vec![(c(&[1.0, 0.0]), 1.0), (c(&[0.0, 1.0]), 1.0)]).unwrap();
    let spec = GridSpec::new(2, 16, Truncation::Open, 0.02, 0.5, 5).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&spec, &Kernel::brownian(), &SourceSpec::none(2), &f0).unwrap())
    };
    let (a, b) = (run(1), run(4));
    let p = WeightParams::new(-1.0 / 3.0, 1.0 / 3.0);
    assert!(trajectory_distance(&a, &b, &p)
        .unwrap()
        .iter()
        .all(|s| s.value == 0.0));
    let r = uniqueness_compare(&a, &b, &p, 0.0).unwrap();
    assert!(r.pass && r.worst_violation == 0.0);
}

#[test]
fn uniqueness_detects_different_solutions() {
    let a = constant_run(0.01, 10);
    let spec = GridSpec::new(1, 64, Truncation::Closed, 0.01, 1.0, 10).unwrap();
    let b = simulate(
        &spec,
        &Kernel::constant(1.0).unwrap(),
        &SourceSpec::none(1),
        &monomer(),
    )
    .unwrap();
    let r = uniqueness_compare(&a, &b, &WeightParams::new(0.0, 0.0), 1e-6).unwrap();
    assert!(!r.pass);
    let other = constant_run(0.01, 20);
    assert!(uniqueness_compare(&a, &other, &WeightParams::new(0.0, 0.0), 1e-6).is_err());
}

#[test]
fn richardson_ratio_is_fourth_order() {
    let ratio = richardson_ratio(
        &constant_run(0.1, 10),
        &constant_run(0.05, 20),
        &constant_run(0.025, 40),
        &WeightParams::new(0.0, 0.0),
    )
    .unwrap();
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn mean_direction_is_conserved_without_source() {
    let f0 = SignedMeasure::new(2, vec![(c(&[1.0, 0.0]), 1.0), (c(&[0.0, 1.0]), 2.0)]).unwrap();
    let spec = GridSpec::new(2, 16, Truncation::Open, 0.05, 2.0, 4).unwrap();
    let traj = simulate(
        &spec,
        &Kernel::constant(2.0).unwrap(),
        &SourceSpec::none(2),
        &f0,
    )
    .unwrap();
    let th = theta0(&f0).unwrap();
    for (_, s) in direction_series(&traj, &th).unwrap() {
        for (m, t) in s.mean_direction.iter().zip(&th) {
            assert!((m - t).abs() < 1e-10);
        }
    }
}

#[test]
fn grid_and_particle_moments_agree() {
    use multicoag_core::diagnostics::moment_agreement;
    use multicoag_core::ssa::{run, SsaConfig};
    let source = SourceSpec::from_atoms(1, vec![(c(&[1.0]), 0.1)]).unwrap();
    let k = Kernel::constant(2.0).unwrap();
    let spec = GridSpec::new(1, 48, Truncation::Open, 0.01, 0.5, 10).unwrap();
    let grid = simulate(&spec, &k, &source, &monomer()).unwrap();
    let cfg = SsaConfig {
        volume: 2e4,
        replicas: 16,
        seed: 7,
        lattice: spec.lattice().unwrap(),
        times: spec.snapshot_times().unwrap(),
    };
    let ssa = run(&cfg, &k, &source, &monomer()).unwrap();
    let r = moment_agreement(&grid, None, &ssa.replicas, &[1.0, 2.0]).unwrap();
    assert!(r.pass, "{}", r.summary_line());
    let r = uniqueness_compare(&grid, &ssa.ensemble, &WeightParams::new(0.0, 0.0), 0.0).unwrap();
    assert!(r.pass, "{}", r.summary_line());

    let slow = simulate(&spec, &Kernel::constant(1.0).unwrap(), &source, &monomer()).unwrap();
    let r = moment_agreement(&slow, None, &ssa.replicas, &[1.0, 2.0]).unwrap();
    assert!(!r.pass);
    assert_eq!(r.location.at.as_deref(), Some("order 2"));
}

#[test]
fn localisation_checks_on_a_short_run() {
    use multicoag_core::diagnostics::{mean_direction_check, variance_trend_check};
    let f0 = SignedMeasure::new(2, vec![(c(&[1.0, 0.0]), 1.0), (c(&[0.0, 1.0]), 1.0)]).unwrap();
    let spec = GridSpec::new(2, 24, Truncation::Open, 0.05, 4.0, 10).unwrap();
    let traj = simulate(
        &spec,
        &Kernel::constant(2.0).unwrap(),
        &SourceSpec::none(2),
        &f0,
    )
    .unwrap();
    let th = theta0(&f0).unwrap();
    let r = mean_direction_check(&traj, &th, 1e-10).unwrap();
    assert!(r.pass, "{}", r.summary_line());
    let r = variance_trend_check(&traj, &th, 1.0).unwrap();
    assert!(r.pass && r.worst_violation < 1.0, "{}", r.summary_line());

    // a single monomer species sits on its own ray: variance 0 at the start
    let ray = SignedMeasure::dirac(c(&[1.0, 1.0]), 1.0);
    let traj = simulate(
        &spec,
        &Kernel::constant(2.0).unwrap(),
        &SourceSpec::none(2),
        &ray,
    )
    .unwrap();
    let r = variance_trend_check(&traj, &theta0(&ray).unwrap(), 0.0).unwrap();
    assert!(!r.pass);
    assert!(variance_trend_check(&traj, &theta0(&ray).unwrap(), 5.0).is_err());
}
