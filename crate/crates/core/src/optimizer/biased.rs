//! AdaGrad with the current gradient folded into its own stepsize.
//!
//! `η_t = α / (β + Σ_{i≤t} ‖g_i‖²)^(½+ε)` correlates the stepsize with the
//! noise of the step it scales, so `E[⟨η_t g_t, ∇f(x_t)⟩]` can be negative.
//! Kept apart from [`super::run`] so that no experiment config can select it
//! by accident.

use crate::error::{Error, Result};
use crate::oracle::NoiseModel;
use crate::rng::SimRng;
use crate::stats::{MeanEstimate, Welford};
use crate::stepsize::StepsizeState;

use super::{drive, OracleSource, RunConfig, RunFailure, StepRule, Trajectory, NOISE_STREAM};

/// Observes `g_t` first, then reads the stepsize.
pub(crate) struct Lookahead(pub(crate) StepsizeState);

impl StepRule for Lookahead {
    fn step(&mut self, _t: u64, g: &[f64], eta: &mut [f64]) -> Result<()> {
        self.0.observe(g)?;
        for (j, e) in eta.iter_mut().enumerate() {
            *e = self.0.coordinate(j);
        }
        Ok(())
    }

    fn next(&self, j: usize) -> f64 {
        self.0.coordinate(j)
    }
}

/// SGD with the biased stepsize. `config.stepsize` must be
/// `BiasedGlobalAdagrad`.
pub fn run_biased(config: &RunConfig) -> std::result::Result<Trajectory, RunFailure> {
    if !config.stepsize.is_biased() {
        return Err(Error::config("stepsize.variant", "the biased path needs biased_global_adagrad").into());
    }
    config.validate()?;
    let state = StepsizeState::new_unchecked(config.stepsize, config.oracle.dim())?;
    let source = OracleSource {
        noise: config.oracle.noise(),
        rng: SimRng::new(config.seed, NOISE_STREAM),
    };
    drive(config, Lookahead(state), source, None)
}

/// Monte Carlo estimate of `E[⟨η_{t+1} g_t, ∇f(x_t)⟩]` for `f(x) = x²/2`,
/// `g_t = x_t + ξ_t` with three-point noise of magnitude `sigma_t`, and
/// `η_{t+1} = α/(A + g_t²)^(½+ε)`.
///
/// `a` stands for `β + Σ_{i<t} g_i²`.
pub fn run_biased_step(
    x_t: f64,
    sigma_t: f64,
    a: f64,
    alpha: f64,
    epsilon: f64,
    rng: &mut SimRng,
    n: u64,
) -> Result<MeanEstimate> {
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::config("a", format!("must be positive, got {a}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config("alpha", format!("must be positive, got {alpha}")));
    }
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::config("epsilon", format!("must lie in [0, 0.5], got {epsilon}")));
    }
    if !(sigma_t >= 0.0 && sigma_t.is_finite() && x_t.is_finite()) {
        return Err(Error::config("sigma", "x and sigma must be finite, sigma non-negative"));
    }
    let noise = NoiseModel::ThreePoint { magnitude: 1.0 }.with_magnitude(sigma_t);
    let mut xi = [0.0];
    let mut acc = Welford::default();
    for _ in 0..n {
        noise.sample_into(rng, &mut xi);
        let g = x_t + xi[0];
        acc.push(alpha * g * x_t / (a + g * g).powf(0.5 + epsilon));
    }
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{THREE_POINT_OFFSETS, THREE_POINT_PROBS};

    fn three_point_support(sigma: f64) -> [(f64, f64); 3] {
        std::array::from_fn(|k| (THREE_POINT_PROBS[k], THREE_POINT_OFFSETS[k] * sigma))
    }

    #[test]
    fn noiseless_step_is_exact_and_positive() {
        let mut rng = SimRng::new(1, 0);
        let est = run_biased_step(1.0, 0.0, 10.0, 1.0, 0.0, &mut rng, 100).unwrap();
        assert_eq!(est.mean, 1.0 / 11f64.sqrt());
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn biased_step_goes_negative_at_large_noise() {
        let mut rng = SimRng::new(3, 0);
        let est = run_biased_step(1.0, 10.0, 10.0, 1.0, 0.0, &mut rng, 200_000).unwrap();
        let exact: f64 = three_point_support(10.0)
            .iter()
            .map(|&(p, xi)| p * (1.0 + xi) / (10.0 + (1.0 + xi).powi(2)).sqrt())
            .sum();
        assert!(exact < 0.0);
        assert!(est.agrees_with(exact, 4.0), "{est:?} vs {exact}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = SimRng::new(1, 0);
        assert!(run_biased_step(1.0, 1.0, 0.0, 1.0, 0.0, &mut rng, 10).is_err());
        assert!(run_biased_step(1.0, 1.0, 1.0, 1.0, 0.0, &mut rng, 0).is_err());
    }
}
