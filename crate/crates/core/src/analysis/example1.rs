//! One step of AdaGrad on `f(x) = x²/2` under three-point noise.

use crate::error::{Error, Result};
use crate::oracle::{THREE_POINT_OFFSETS, THREE_POINT_PROBS};

fn validate(x: f64, sigma: f64, a: f64, alpha: f64, epsilon: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::config("a", format!("must be positive, got {a}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config("alpha", format!("must be positive, got {alpha}")));
    }
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::config("epsilon", format!("must lie in [0, 0.5], got {epsilon}")));
    }
    if !(x.is_finite() && sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::config("sigma", "x and sigma must be finite, sigma non-negative"));
    }
    Ok(())
}

/// `E[⟨η_{t+1} g_t, ∇f(x_t)⟩]` with `η_{t+1} = α/(A + g_t²)^(½+ε)` and
/// `g_t = x + ξ`, enumerated over the three noise outcomes.
pub fn example1_exact(x: f64, sigma: f64, a: f64, alpha: f64, epsilon: f64) -> Result<f64> {
    validate(x, sigma, a, alpha, epsilon)?;
    let p = 0.5 + epsilon;
    let mut sum = 0.0;
    for (prob, offset) in THREE_POINT_PROBS.iter().zip(THREE_POINT_OFFSETS) {
        let g = x + offset * sigma;
        sum += prob * g * x / (a + g * g).powf(p);
    }
    Ok(alpha * sum)
}

/// `E[⟨η_t g_t, ∇f(x_t)⟩]` with the delayed stepsize `η_t = α/A^(½+ε)`,
/// which equals `η_t x²` for any mean-zero noise.
pub fn unbiased_direction_check(x: f64, sigma: f64, a: f64, alpha: f64, epsilon: f64) -> Result<f64> {
    validate(x, sigma, a, alpha, epsilon)?;
    let eta = alpha / a.sqrt() / a.powf(epsilon);
    Ok(eta * x * x)
}
