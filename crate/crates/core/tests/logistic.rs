mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{fd_gradient, mesh, rel_sup, sample};
use nlogis_core::logistic::{
    abundance_sweep, assemble_for, beat_experiment, check_fitting_bounds, congruence_experiment,
    energy, energy_gradient, ext_crossing, minimize, periodic_balance, solve, solve_dirichlet,
    solve_periodic, threshold_radius, Classification, SolveReport,
};
use nlogis_core::spectral::{eigenvalue_on, first_eigenpair};
use nlogis_core::{
    build_kernel, Coefficient, Error, Field, KernelShape, Mesh, PeriodicGrid, ProblemSpec, Tolerances,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn spec(m: &Arc<Mesh>, s: f64, sigma: Coefficient, tau: f64, rho: f64) -> ProblemSpec {
    let kernel = (tau > 0.0).then(|| build_kernel(KernelShape::Uniform, rho, m.h()).unwrap());
    ProblemSpec::new(m.clone(), s, &sigma, &1.0.into(), tau, kernel, Tolerances::default()).unwrap()
}

fn periodic(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::Periodic(PeriodicGrid::new(n, 8).unwrap()))
}

fn unit() -> Arc<Mesh> {
    mesh(&[(0.0, 1.0)], 1.0 / 64.0)
}

/// Invariants every report must satisfy.
fn assert_sane(rep: &SolveReport, sp: &ProblemSpec) {
    assert!(rep.u.values().iter().all(|&v| v >= 0.0));
    assert!(rep.energy <= 1e-14);
    assert!(rep.el_residual <= sp.solver_tol);
    assert!(rep.history.windows(2).all(|w| w[1] <= w[0]));
    assert!(rep.dichotomy_holds(sp.triviality_tol));
    let expected = if rep.u.sup_norm() <= sp.triviality_tol {
        Classification::Trivial
    } else {
        Classification::Nontrivial
    };
    assert_eq!(rep.classification, expected);
    if rep.is_nontrivial() {
        assert!(rep.u.max() <= sp.sigma.max() + sp.tau + 10.0 * sp.solver_tol);
    }
}

#[test]
fn zero_is_a_critical_point_with_zero_energy() {
    let m = unit();
    let sp = spec(&m, 0.5, 2.0.into(), 0.3, 0.1);
    let a = assemble_for(&sp).unwrap();
    let zero = Field::zeros(m.clone());
    assert_eq!(energy(&zero, &sp, &a).unwrap(), 0.0);
    assert_eq!(energy_gradient(&zero, &sp, &a).unwrap().sup_norm(), 0.0);
}

#[test]
fn energy_dips_below_zero_along_the_eigenvector() {
    let m = unit();
    let lambda = eigenvalue_on(&[(0.0, 1.0)], 0.5, m.h()).unwrap();
    let sp = spec(&m, 0.5, (lambda + 1.0).into(), 0.0, 0.0);
    let a = assemble_for(&sp).unwrap();
    let e = first_eigenpair(&a).unwrap().e;
    assert!(energy(&e.map(|v| 1e-3 * v), &sp, &a).unwrap() < 0.0);
}

fn check_gradient(sp: &ProblemSpec, seed: u64) {
    let a = assemble_for(sp).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..20 {
        let vals: Vec<f64> = (0..sp.mesh().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = Field::new(sp.mesh().clone(), vals).unwrap();
        let h = sp.mesh().h();
        let analytic: Vec<f64> =
            energy_gradient(&u, sp, &a).unwrap().values().iter().map(|g| h * g).collect();
        let numeric = fd_gradient(u.values(), 1e-6, &|v: &[f64]| {
            energy(&u.with_values(v.to_vec()).unwrap(), sp, &a).unwrap()
        });
        let err = rel_sup(&numeric, &analytic);
        assert!(err <= 1e-6, "relative gradient error {err}");
    }
}

#[test]
fn dirichlet_gradient_matches_finite_differences() {
    let m = mesh(&[(0.0, 1.0), (1.25, 1.75)], 1.0 / 32.0);
    check_gradient(&spec(&m, 0.5, Coefficient::function(|x| 3.0 + x), 0.4, 0.2), 1);
    check_gradient(&spec(&m, 0.3, 2.0.into(), 0.0, 0.0), 2);
    check_gradient(&spec(&m, 1.0, 2.0.into(), 0.0, 0.0), 3);
}

#[test]
fn periodic_gradient_matches_finite_differences() {
    let m = periodic(48);
    check_gradient(&spec(&m, 0.5, Coefficient::function(|x| 2.0 + (2.0 * PI * x).cos()), 0.5, 0.1), 4);
    check_gradient(&spec(&m, 0.75, 1.0.into(), 0.0, 0.0), 5);
}

#[test]
fn constant_is_critical_for_constant_periodic_data() {
    let m = periodic(128);
    let sp = spec(&m, 0.5, 2.0.into(), 0.5, 0.1);
    let a = assemble_for(&sp).unwrap();
    let g = energy_gradient(&Field::constant(m.clone(), 2.5), &sp, &a).unwrap();
    assert!(g.sup_norm() <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn absolute_value_never_raises_the_energy(
        s in 0.25f64..0.95,
        tau in 0.0f64..1.0,
        vals in proptest::collection::vec(-2.0f64..2.0, 31),
    ) {
        let m = mesh(&[(0.0, 1.0)], 1.0 / 32.0);
        let sp = spec(&m, s, Coefficient::function(|x| 1.0 + 4.0 * x), tau, 0.25);
        let a = assemble_for(&sp).unwrap();
        let u = Field::new(m.clone(), vals).unwrap();
        let e = energy(&u, &sp, &a).unwrap();
        let e_abs = energy(&u.abs(), &sp, &a).unwrap();
        prop_assert!(e_abs <= e + 1e-12 * e.abs().max(1.0));
    }
}

#[test]
fn no_resource_means_extinction() {
    let m = unit();
    let sp = spec(&m, 0.5, 0.0.into(), 0.0, 0.0);
    let rep = solve(&sp).unwrap();
    assert_eq!(rep.classification, Classification::Trivial);
    assert_sane(&rep, &sp);
}

#[test]
fn threshold_in_the_resource_level() {
    let m = unit();
    for s in [0.25, 0.5, 0.75, 1.0] {
        let lambda = eigenvalue_on(&[(0.0, 1.0)], s, m.h()).unwrap();
        let below = spec(&m, s, (lambda - 0.1).into(), 0.0, 0.0);
        let rep = solve_dirichlet(&below).unwrap();
        assert_eq!(rep.classification, Classification::Trivial, "s={s}");
        assert_sane(&rep, &below);

        let above = spec(&m, s, (lambda + 0.5).into(), 0.0, 0.0);
        let rep = solve_dirichlet(&above).unwrap();
        assert_eq!(rep.classification, Classification::Nontrivial, "s={s}");
        assert!(rep.u.min() > 0.0);
        assert_sane(&rep, &above);
    }
}

#[test]
fn resource_plus_reach_below_the_eigenvalue_is_extinction() {
    let m = unit();
    let lambda = eigenvalue_on(&[(0.0, 1.0)], 0.5, m.h()).unwrap();
    // nonconstant σ with sup σ + τ just below λ
    let sp = spec(&m, 0.5, Coefficient::function(move |x| 0.8 * lambda * x), 0.15 * lambda, 0.1);
    assert!(sp.sigma.max() + sp.tau <= lambda);
    let rep = solve(&sp).unwrap();
    assert_eq!(rep.classification, Classification::Trivial);
}

#[test]
fn mixed_sign_start_reaches_the_same_state() {
    let m = unit();
    let lambda = eigenvalue_on(&[(0.0, 1.0)], 0.5, m.h()).unwrap();
    for sigma in [0.5 * lambda, 2.0 * lambda] {
        let sp = spec(&m, 0.5, sigma.into(), 0.0, 0.0);
        let a = assemble_for(&sp).unwrap();
        let reference = solve_with_spec(&sp);
        let mixed = sample(&m, |x| (6.0 * PI * x).sin() * 3.0);
        let rep = minimize(&sp, &a, &mixed).unwrap();
        assert_eq!(rep.classification, reference.classification);
        assert_sane(&rep, &sp);
        if rep.is_nontrivial() {
            assert!(rel_sup(rep.u.values(), reference.u.values()) < 1e-6);
        }
    }
}

fn solve_with_spec(sp: &ProblemSpec) -> SolveReport {
    let rep = solve(sp).unwrap();
    assert_sane(&rep, sp);
    rep
}

#[test]
fn minimize_never_ends_above_its_start() {
    let m = unit();
    let sp = spec(&m, 0.5, 30.0.into(), 0.5, 0.2);
    let a = assemble_for(&sp).unwrap();
    let init = sample(&m, |x| 5.0 * x * (1.0 - x));
    let e0 = energy(&init, &sp, &a).unwrap();
    let rep = minimize(&sp, &a, &init).unwrap();
    assert!(rep.energy <= e0.min(0.0));
    assert_sane(&rep, &sp);
}

#[test]
fn vanishing_mu_is_rejected() {
    let m = unit();
    let sp = ProblemSpec::new(m, 0.5, &5.0.into(), &0.0.into(), 0.0, None, Tolerances::default()).unwrap();
    assert!(matches!(solve(&sp), Err(Error::InvalidParameter { .. })));
}

#[test]
fn periodic_constant_state() {
    let m = periodic(128);
    let sp = spec(&m, 0.5, 2.0.into(), 0.5, 0.1);
    let rep = solve_periodic(&sp).unwrap();
    assert_sane(&rep, &sp);
    let dev = rep.u.values().iter().fold(0.0f64, |d, v| d.max((v - 2.5).abs()));
    assert!(dev <= 1e-8, "{dev}");
    let bal = periodic_balance(&rep, &sp).unwrap();
    assert!(bal.constant_identity_gap.unwrap().abs() <= 1e-8);
    assert!((bal.mean - 2.5).abs() <= 1e-8);
}

#[test]
fn periodic_without_resource_is_trivial() {
    let m = periodic(64);
    let sp = spec(&m, 0.5, 0.0.into(), 0.0, 0.0);
    let rep = solve_periodic(&sp).unwrap();
    assert_eq!(rep.classification, Classification::Trivial);
    assert!(solve_dirichlet(&sp).is_err());
}

#[test]
fn periodic_varying_resource_gives_a_varying_state() {
    let m = periodic(128);
    let sp = spec(&m, 0.5, Coefficient::function(|x| 2.0 + (2.0 * PI * x).cos()), 0.0, 0.0);
    let rep = solve_periodic(&sp).unwrap();
    assert_sane(&rep, &sp);
    assert!(rep.u.min() > 0.0);
    assert!(rep.u.max() - rep.u.min() > 1e-2);
    let bal = periodic_balance(&rep, &sp).unwrap();
    assert!(bal.constant_identity_gap.is_none());
    assert!(bal.source_integral.abs() <= 1e-9);

    // constant control with the same mean resource
    let control = spec(&m, 0.5, 2.0.into(), 0.0, 0.0);
    let rep = solve_periodic(&control).unwrap();
    let bal = periodic_balance(&rep, &control).unwrap();
    assert!(bal.constant_identity_gap.unwrap().abs() <= 1e-9);
}

#[test]
fn maximum_principle_bound_for_a_flat_resource() {
    // on (0, 4) the resource level 3 exceeds the first eigenvalue
    let m = mesh(&[(0.0, 4.0)], 1.0 / 32.0);
    let sp = spec(&m, 0.5, 3.0.into(), 0.0, 0.0);
    let rep = solve(&sp).unwrap();
    assert!(rep.is_nontrivial());
    let diag = check_fitting_bounds(&rep, &sp, Some((1.0, 3.0)), Some(3.0)).unwrap();
    assert!(diag.max_u <= 3.0 + 10.0 * sp.solver_tol);
    assert!(diag.easy_holds);
    assert_eq!(diag.bound_easy, 3.0);
    assert!(diag.inf_on_ball > 0.0 && diag.ratio > 0.0);
}

#[test]
fn fitting_diagnostics_of_a_trivial_report_are_zero() {
    let m = unit();
    let sp = spec(&m, 0.5, 0.0.into(), 0.0, 0.0);
    let rep = solve(&sp).unwrap();
    let diag = check_fitting_bounds(&rep, &sp, Some((0.25, 0.75)), Some(1.0)).unwrap();
    assert_eq!((diag.max_u, diag.bound_easy, diag.inf_on_ball, diag.ratio), (0.0, 0.0, 0.0, 0.0));
    assert!(check_fitting_bounds(&rep, &sp, Some((0.5, 1.5)), None).is_err());
}

#[test]
fn abundance_ratio_is_stable_at_high_levels() {
    let rep = abundance_sweep(&[(-2.0, 2.0)], 1.0, 0.5, 0.5, 1.0 / 64.0, 20.0, 3, Tolerances::default())
        .unwrap();
    let levels: Vec<f64> = rep.rows.iter().map(|r| r.level).collect();
    assert_eq!(levels.len(), 3);
    assert!(levels.windows(2).all(|w| w[1] == 2.0 * w[0]));
    assert!(rep.variation <= 0.25, "{}", rep.variation);
    assert!(rep.rows.iter().all(|r| r.ratio > 0.1 && r.easy_holds));
}

fn dipped(m: &Arc<Mesh>, big_m: f64) -> Field {
    sample(m, move |x| {
        let d = (x - 1.5).abs();
        if d < 0.4 {
            big_m * 0.5 * (1.0 - (PI * d / 0.4).cos())
        } else {
            big_m
        }
    })
}

#[test]
fn population_beats_a_dipped_resource() {
    let m = mesh(&[(-2.0, 2.0)], 1.0 / 64.0);
    let sigma0 = dipped(&m, 20.0);
    let rep = beat_experiment(&sigma0, 0.5, &[0.01, 0.1, 1.0], Tolerances::default()).unwrap();
    assert_eq!(rep.first_m, Some(0.01));
    let row = &rep.rows[0];
    assert!(row.beat_nodes.iter().all(|&i| (m.node(i) - 1.5).abs() < 0.4));
}

#[test]
fn population_never_beats_a_flat_resource() {
    let m = mesh(&[(-2.0, 2.0)], 1.0 / 64.0);
    let flat = Field::constant(m.clone(), 20.0);
    let rep = beat_experiment(&flat, 0.5, &[0.01, 0.1, 1.0, 2.0, 4.0], Tolerances::default()).unwrap();
    assert_eq!(rep.first_m, None);
    assert!(rep.rows.iter().all(|r| r.beat_nodes.is_empty()));
}

#[test]
fn beat_scan_rejects_a_barren_profile() {
    let m = mesh(&[(0.0, 1.0)], 1.0 / 32.0);
    let barren = Field::zeros(m.clone());
    assert!(beat_experiment(&barren, 0.5, &[0.01, 0.1], Tolerances::default()).is_err());
}

#[test]
fn lower_order_wins_on_small_domains_and_loses_on_large_ones() {
    let grid: Vec<f64> = (0..25).map(|k| 0.05 * (400.0f64).powf(k as f64 / 24.0)).collect();
    let rep = ext_crossing(&[(0.0, 1.0)], 0.25, 1.0, &grid, 1.0 / 128.0, 0.1, Tolerances::default()).unwrap();
    assert_eq!(rep.sign_changes, 1);
    let small = &rep.small;
    assert!(small.r < rep.predicted_crossing && rep.large.r > rep.predicted_crossing);
    // small r: only the lower order survives; large r: only the higher order
    assert!(small.low.is_nontrivial() && !small.high.is_nontrivial());
    assert!(!rep.large.low.is_nontrivial() && rep.large.high.is_nontrivial());
    assert!(small.matches && rep.large.matches);
}

#[test]
fn ext_scan_needs_a_bracketing_grid() {
    let grid = [0.05, 0.1, 0.2];
    assert!(ext_crossing(&[(0.0, 1.0)], 0.25, 1.0, &grid, 1.0 / 64.0, 0.1, Tolerances::default()).is_err());
}

#[test]
fn congruent_copies_support_a_population_together() {
    let rep = congruence_experiment((0.0, 1.0), (2.0, 3.0), 0.5, 1.0 / 64.0, Tolerances::default()).unwrap();
    assert!(rep.lambda_union < rep.lambda_single.0);
    assert!(rep.sigma > rep.lambda_union && rep.sigma < rep.lambda_single.0);
    assert!(!rep.reports[0].is_nontrivial() && !rep.reports[1].is_nontrivial());
    assert!(rep.reports[2].is_nontrivial() && rep.union_positive_on_both);
}

#[test]
fn congruence_fails_for_the_classical_operator() {
    let err = congruence_experiment((0.0, 1.0), (2.0, 3.0), 1.0, 1.0 / 64.0, Tolerances::default());
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn admissible_window_narrows_with_separation() {
    let h = 1.0 / 32.0;
    let window = |gap: f64| {
        let union = eigenvalue_on(&[(0.0, 1.0), (1.0 + gap, 2.0 + gap)], 0.5, h).unwrap();
        eigenvalue_on(&[(0.0, 1.0)], 0.5, h).unwrap() - union
    };
    assert!(window(16.0) < window(1.0));
    assert!(window(16.0) > 0.0);
}

#[test]
fn critical_radius_matches_the_scaling_prediction() {
    let rep = threshold_radius(&[(0.0, 1.0)], 0.5, 1.0 / 128.0, (0.5, 20.0), 1e-3, Tolerances::default())
        .unwrap();
    assert!(rep.rel_gap <= 0.05, "{rep:?}");
    assert!(rep.nontrivial_reports.iter().all(|r| r.is_nontrivial()));
    assert!(threshold_radius(&[(0.0, 1.0)], 0.5, 1.0 / 128.0, (5.0, 20.0), 1e-3, Tolerances::default()).is_err());
}
