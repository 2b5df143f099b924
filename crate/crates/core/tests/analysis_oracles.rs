use adastep::analysis::bounds::{theorem_convex_bound, theorem_nonconvex_bound, BoundParams};
use adastep::analysis::{example1_exact, fit_rate, unbiased_direction_check};
use adastep::oracle::{THREE_POINT_OFFSETS, THREE_POINT_PROBS};
use proptest::prelude::*;

/// Convex bound recomputed in log space.
fn convex_oracle(p: &BoundParams, dist: f64) -> f64 {
    let (a, b, e, m, s) = (p.alpha, p.beta, p.epsilon, p.smoothness, p.sigma);
    let t = p.horizon as f64;
    let lt = t.ln() + 1.0;
    let frac = 1.0 - (4.0 * a * m).ln().exp() * (-(0.5 + e) * b.ln()).exp();
    let noise_term = (2.0 * a.ln() + 4f64.ln() + lt.ln() + 2.0 * s.ln() - (1.0 + 2.0 * e) * b.ln()).exp();
    let k = if e > 0.0 {
        a / (2.0 * e * b.powf(2.0 * e) * frac)
    } else {
        let big_a = (b + 2.0 * t * s * s).sqrt();
        let big_b = 2.0 * m.sqrt();
        let d = a / frac;
        let c = (b * dist * dist + 4.0 * a * a * lt * s * s) / (2.0 * a * b * frac);
        let inner = 2.0 * big_a + 32.0 * big_b.powi(4) * d * d + 2.0 * big_b * big_b * c + 8.0 * big_b.powi(3) * d * c.sqrt();
        d * inner.ln()
    };
    let gamma = (dist * dist + if s > 0.0 { noise_term } else { 0.0 }) / (a * frac) + k;
    let q = 0.5 - e;
    let ln_first = (0.5 + e) / q * 2f64.ln() + (0.5 + e) * (4.0 * m).ln() + gamma.ln();
    let ln_second = (0.5 + e) * 2f64.ln() + q * gamma.ln() + (0.25 - e * e) * (b + 2.0 * t * s * s).ln();
    (ln_first.max(ln_second) - q * t.ln()).exp()
}

/// Nonconvex bound recomputed in log space.
fn nonconvex_oracle(p: &BoundParams, gap: f64) -> f64 {
    let (a, b, e, m, s) = (p.alpha, p.beta, p.epsilon, p.smoothness, p.sigma);
    let t = p.horizon as f64;
    let lt = t.ln() + 1.0;
    let frac = 1.0 - 2.0 * a * m * (-(0.5 + e) * b.ln()).exp();
    let k = if e > 0.0 {
        a * m / (4.0 * e * b.powf(2.0 * e) * frac)
    } else {
        let big_a = (b + 2.0 * t * s * s).sqrt();
        let big_b = 2f64.sqrt();
        let d = a * m / frac;
        let c = (b * gap + 2.0 * a * lt * s * s) / (a * b * frac);
        let inner = 2.0 * big_a + 32.0 * big_b.powi(4) * d * d + 2.0 * big_b * big_b * c + 8.0 * big_b.powi(3) * d * c.sqrt();
        d * inner.ln()
    };
    let gamma = gap / (a * frac) + 2.0 * a * m * s * s * lt / (b.powf(1.0 + 2.0 * e) * frac) + k;
    let q = 0.5 - e;
    let ln_first = (0.5 + e) / q * 2f64.ln() + gamma.ln();
    let ln_second = (0.5 + e) * 2f64.ln() + (0.25 - e * e) * (b + 2.0 * t * s * s).ln() + q * gamma.ln();
    (ln_first.max(ln_second) - q * t.ln()).exp()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn params() -> impl Strategy<Value = (BoundParams, f64)> {
    (
        0.1f64..10.0,
        prop_oneof![Just(0.0), 0.0f64..0.45],
        0.1f64..20.0,
        prop_oneof![Just(0.0), 0.01f64..5.0],
        1u64..10_000_000,
        0.01f64..0.9,
        0.0f64..10.0,
    )
        .prop_map(|(beta, epsilon, smoothness, sigma, horizon, frac, initial)| {
            // alpha placed at a fraction of the convex precondition boundary
            let alpha = frac * beta.powf(0.5 + epsilon) / (4.0 * smoothness);
            (BoundParams { alpha, beta, epsilon, smoothness, sigma, horizon }, initial)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn convex_bound_matches_oracle((p, dist) in params()) {
        let eval = theorem_convex_bound(&p, dist).unwrap();
        let rhs = eval.rhs.unwrap();
        let oracle = convex_oracle(&p, dist);
        prop_assert!(rel_close(rhs, oracle, 1e-12), "{rhs} vs {oracle}");
        prop_assert_eq!(theorem_convex_bound(&p, dist).unwrap(), eval);
    }

    #[test]
    fn nonconvex_bound_matches_oracle((p, gap) in params()) {
        let eval = theorem_nonconvex_bound(&p, gap).unwrap();
        let rhs = eval.rhs.unwrap();
        let oracle = nonconvex_oracle(&p, gap);
        prop_assert!(rel_close(rhs, oracle, 1e-12), "{rhs} vs {oracle}");
        for c in &eval.confidence {
            let expected = (rhs / c.delta).powf(1.0 / (0.5 - p.epsilon));
            prop_assert!(rel_close(c.bound, expected, 1e-12));
        }
    }

    #[test]
    fn fit_rate_recovers_power_laws(
        slope in -3.0f64..1.0,
        log_c in -10.0f64..10.0,
        start in 1u32..4,
        n in 3usize..10,
    ) {
        let points: Vec<(u64, f64)> = (0..n)
            .map(|k| {
                let t = 10u64.pow(start) * 2u64.pow(k as u32);
                (t, (log_c + slope * (t as f64).ln()).exp())
            })
            .collect();
        let fit = fit_rate("m", &points).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-12 * slope.abs().max(1.0), "{} vs {slope}", fit.slope);
        prop_assert!((fit.intercept - log_c).abs() <= 1e-9 * log_c.abs().max(1.0));
        prop_assert!(fit.r_squared > 1.0 - 1e-12 || slope.abs() < 1e-9);
    }

    #[test]
    fn example1_matches_direct_enumeration(
        x in -5.0f64..5.0, sigma in 0.0f64..20.0, a in 0.01f64..50.0, alpha in 0.01f64..5.0, epsilon in 0.0f64..0.5,
    ) {
        let direct: f64 = THREE_POINT_PROBS.iter().zip(THREE_POINT_OFFSETS)
            .map(|(p, o)| {
                let g = x + o * sigma;
                p * alpha * g * x * (a + g * g).powf(-(0.5 + epsilon))
            })
            .sum();
        let exact = example1_exact(x, sigma, a, alpha, epsilon).unwrap();
        prop_assert!((exact - direct).abs() <= 1e-12 * direct.abs().max(1e-12));

        let unbiased = unbiased_direction_check(x, sigma, a, alpha, epsilon).unwrap();
        prop_assert!(unbiased >= 0.0);
        let eta = alpha * a.powf(-(0.5 + epsilon));
        prop_assert!((unbiased - eta * x * x).abs() <= 1e-14 * unbiased.max(1e-300));
    }
}

#[test]
fn three_point_noise_is_centred() {
    let total: f64 = THREE_POINT_PROBS.iter().sum();
    let mean: f64 = THREE_POINT_PROBS.iter().zip(THREE_POINT_OFFSETS).map(|(p, o)| p * o).sum();
    assert!((total - 1.0).abs() < 1e-15);
    assert!(mean.abs() < 1e-15);
}

#[test]
fn example1_signs_at_reference_parameters() {
    assert!(example1_exact(1.0, 10.0, 10.0, 1.0, 0.0).unwrap() < 0.0);
    assert!(example1_exact(1.0, 10.0, 10.0, 1.0, 0.1).unwrap() < 0.0);
    assert!(example1_exact(1.0, 0.0, 10.0, 1.0, 0.0).unwrap() > 0.0);
    assert_eq!(unbiased_direction_check(1.0, 10.0, 10.0, 1.0, 0.0).unwrap(), 10f64.powf(-0.5));
}
