mod common;

use common::{mesh, sample};
use nlogis_core::{build_grid, l2_inner, l2_norm, sample_function, Coefficient, Field};
use proptest::prelude::*;

#[test]
fn node_layout_of_a_union() {
    let g = build_grid(&[(2.0, 3.0), (0.0, 1.0)], 0.25).unwrap();
    assert_eq!(g.intervals(), &[(0.0, 1.0), (2.0, 3.0)]);
    assert_eq!(g.nodes(), &[0.25, 0.5, 0.75, 2.25, 2.5, 2.75]);
    assert_eq!(g.interval_id(), &[0, 0, 0, 1, 1, 1]);
    assert!(build_grid(&[(0.0, 1.0), (1.0, 2.0)], 0.25).is_err());
    assert!(build_grid(&[(0.0, 1.0)], 0.3).is_err());
}

#[test]
fn table_coefficients_must_match_the_node_count() {
    let m = mesh(&[(0.0, 1.0)], 0.25);
    assert!(sample_function(&m, &Coefficient::Table(vec![1.0; 3])).is_ok());
    assert!(sample_function(&m, &Coefficient::Table(vec![1.0; 4])).is_err());
}

#[test]
fn fields_on_different_meshes_do_not_mix() {
    let a = Field::constant(mesh(&[(0.0, 1.0)], 0.25), 1.0);
    let b = Field::constant(mesh(&[(0.0, 1.0)], 0.125), 1.0);
    assert!(l2_inner(&a, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fields_vanish_off_the_domain(x in -5.0f64..5.0) {
        let m = mesh(&[(0.0, 1.0), (2.0, 2.5)], 1.0 / 16.0);
        let u = sample(&m, |y| 1.0 + y * y);
        let inside = (0.0 < x && x < 1.0) || (2.0 < x && x < 2.5);
        if !inside {
            prop_assert_eq!(u.eval(x), 0.0);
        }
    }

    #[test]
    fn interpolation_reproduces_nodes(k in 0usize..22) {
        let m = mesh(&[(0.0, 1.0), (2.0, 2.5)], 1.0 / 16.0);
        let u = sample(&m, |y| (3.0 * y).sin());
        prop_assert_eq!(u.eval(m.node(k)), u.values()[k]);
    }

    #[test]
    fn norm_is_homogeneous(c in -10.0f64..10.0) {
        let m = mesh(&[(0.0, 1.0)], 1.0 / 16.0);
        let u = sample(&m, |y| y * (1.0 - y));
        let scaled = u.map(|v| c * v);
        prop_assert!((l2_norm(&scaled) - c.abs() * l2_norm(&u)).abs() <= 1e-14);
    }
}
