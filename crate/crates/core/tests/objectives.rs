use std::sync::Arc;

use adastep::problems::{
    check_lipschitz, check_lower_bound, check_smoothness_inequality, make_logistic, make_quadratic,
    make_smooth_nonconvex, Objective,
};
use adastep::Vector;
use proptest::prelude::*;

const FD_STEP: f64 = 1e-5;

fn objective_strategy() -> impl Strategy<Value = Arc<Objective>> {
    prop_oneof![
        (1usize..6, prop::collection::vec(0.1f64..10.0, 6), any::<u64>()).prop_map(|(d, eig, seed)| {
            let center = Vector::new((0..d).map(|i| 0.3 * i as f64 - 0.5).collect()).unwrap();
            Arc::new(make_quadratic(d, &eig[..d], &center, seed).unwrap())
        }),
        (1usize..5, 0u64..50).prop_map(|(d, seed)| Arc::new(make_logistic(d, 60, seed).unwrap())),
        (1usize..6).prop_map(|d| Arc::new(make_smooth_nonconvex(d).unwrap())),
    ]
}

fn point(dim: usize, raw: &[f64]) -> Vec<f64> {
    raw.iter().cycle().take(dim).copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences(obj in objective_strategy(), raw in prop::collection::vec(-3.0f64..3.0, 6)) {
        let x = point(obj.dim(), &raw);
        let g = obj.grad(&x).unwrap();
        for i in 0..obj.dim() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += FD_STEP;
            xm[i] -= FD_STEP;
            let fd = (obj.eval(&xp).unwrap() - obj.eval(&xm).unwrap()) / (2.0 * FD_STEP);
            let gi = g.as_slice()[i];
            prop_assert!((fd - gi).abs() <= 1e-6 * gi.abs().max(1.0), "coordinate {i}: fd {fd} vs grad {gi}");
        }
    }

    #[test]
    fn evaluation_is_pure(obj in objective_strategy(), raw in prop::collection::vec(-5.0f64..5.0, 6)) {
        let x = point(obj.dim(), &raw);
        prop_assert_eq!(obj.eval(&x).unwrap().to_bits(), obj.eval(&x).unwrap().to_bits());
        let a = obj.grad(&x).unwrap();
        let b = obj.grad(&x).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn value_never_below_f_star(obj in objective_strategy(), raw in prop::collection::vec(-20.0f64..20.0, 6)) {
        let x = point(obj.dim(), &raw);
        prop_assert!(obj.eval(&x).unwrap() >= obj.f_star() - 1e-9);
        prop_assert!(obj.gap(&x).unwrap() >= -1e-9);
    }
}

fn audit_pool() -> Vec<Objective> {
    vec![
        make_quadratic(1, &[3.0], &Vector::zeros(1), 0).unwrap(),
        make_quadratic(10, &(1..=10).map(f64::from).collect::<Vec<_>>(), &Vector::zeros(10), 7).unwrap(),
        make_quadratic(4, &[0.01, 0.1, 1.0, 100.0], &Vector::filled(4, 1.0).unwrap(), 3).unwrap(),
        make_logistic(3, 100, 1).unwrap(),
        make_logistic(8, 200, 2).unwrap(),
        make_smooth_nonconvex(1).unwrap(),
        make_smooth_nonconvex(10).unwrap(),
    ]
}

#[test]
fn smoothness_inequality_holds_on_random_pairs() {
    for (k, obj) in audit_pool().iter().enumerate() {
        let worst = check_smoothness_inequality(obj, 10_000, k as u64).unwrap();
        assert!(worst <= 1e-9, "{:?}: {worst}", obj.kind());
    }
}

#[test]
fn lipschitz_audit_on_bounded_slope_objectives() {
    for (k, obj) in audit_pool().iter().enumerate() {
        let audit = check_lipschitz(obj, 10_000, k as u64).unwrap();
        match obj.constants().lipschitz {
            Some(_) => assert!(audit.unwrap() <= 1e-9, "{:?}", obj.kind()),
            None => assert!(audit.is_none()),
        }
        assert!(check_lower_bound(obj, 10_000, k as u64).unwrap() <= 1e-9);
    }
}
