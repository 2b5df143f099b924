//! Stochastic first-order oracle `g(x, ξ) = ∇f(x) + ξ`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Objective;
pub use crate::rng::SimRng;
use crate::vector::{self, Vector};

/// Additive, mean-zero gradient noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    /// Uniform on the closed ball of radius `radius`.
    BoundedSphere { radius: f64 },
    /// I.i.d. `N(0, sigma²/d)` per coordinate, so `E‖ξ‖² = sigma²`.
    Gaussian { sigma: f64 },
    /// One-dimensional `ξ ∈ {+m, −3m/2, −m/2}` with probabilities
    /// `{7/15, 1/5, 1/3}`.
    ThreePoint { magnitude: f64 },
}

pub const THREE_POINT_PROBS: [f64; 3] = [7.0 / 15.0, 1.0 / 5.0, 1.0 / 3.0];
pub const THREE_POINT_OFFSETS: [f64; 3] = [1.0, -1.5, -0.5];

impl NoiseModel {
    /// Noise model with total magnitude `sigma` of the same family, or
    /// `None` when `sigma == 0`.
    pub fn with_magnitude(&self, sigma: f64) -> NoiseModel {
        if sigma == 0.0 {
            return NoiseModel::None;
        }
        match self {
            NoiseModel::None | NoiseModel::BoundedSphere { .. } => {
                NoiseModel::BoundedSphere { radius: sigma }
            }
            NoiseModel::Gaussian { .. } => NoiseModel::Gaussian { sigma },
            NoiseModel::ThreePoint { .. } => NoiseModel::ThreePoint { magnitude: sigma },
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::BoundedSphere { radius } => positive("noise.radius", radius),
            NoiseModel::Gaussian { sigma } => positive("noise.sigma", sigma),
            NoiseModel::ThreePoint { magnitude } => {
                positive("noise.magnitude", magnitude)?;
                if dim != 1 {
                    return Err(Error::config(
                        "noise.kind",
                        format!("three_point noise is one-dimensional, objective has dim {dim}"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Whether `‖ξ‖ ≤ S` holds almost surely for some finite `S`.
    pub fn has_bounded_support(&self) -> bool {
        !matches!(self, NoiseModel::Gaussian { .. })
    }

    /// Almost-sure bound on `‖ξ‖`, when one exists.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            NoiseModel::None => Some(0.0),
            NoiseModel::BoundedSphere { radius } => Some(radius),
            NoiseModel::Gaussian { .. } => None,
            NoiseModel::ThreePoint { magnitude } => Some(1.5 * magnitude),
        }
    }

    /// Smallest `σ` with `E[exp(‖ξ‖²/σ²)] ≤ e` that this model is known to
    /// satisfy in dimension `dim`.
    ///
    /// Bounded models use their support radius. For the Gaussian model,
    /// `‖ξ‖² = (s²/d) χ²_d` and the χ² moment generating function gives the
    /// exact condition `σ² ≥ 2s² / (d (1 − e^{−2/d}))`.
    pub fn subgaussian_constant(&self, dim: usize) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                let d = dim as f64;
                (2.0 * sigma * sigma / (d * -(-2.0 / d).exp_m1())).sqrt()
            }
            _ => self.support_radius().unwrap_or(0.0),
        }
    }

    /// Draws one noise vector into `out`.
    pub fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        match *self {
            NoiseModel::None => out.iter_mut().for_each(|v| *v = 0.0),
            NoiseModel::BoundedSphere { radius } => {
                let d = out.len();
                let norm_sq = loop {
                    for v in out.iter_mut() {
                        *v = rng.standard_normal();
                    }
                    let n = vector::norm_sq(out);
                    if n > 0.0 {
                        break n;
                    }
                };
                let r = radius * rng.uniform().powf(1.0 / d as f64);
                let scale = r / norm_sq.sqrt();
                out.iter_mut().for_each(|v| *v *= scale);
            }
            NoiseModel::Gaussian { sigma } => {
                let scale = sigma / (out.len() as f64).sqrt();
                for v in out.iter_mut() {
                    *v = scale * rng.standard_normal();
                }
            }
            NoiseModel::ThreePoint { magnitude } => {
                let u = rng.uniform();
                let k = if u < THREE_POINT_PROBS[0] {
                    0
                } else if u < THREE_POINT_PROBS[0] + THREE_POINT_PROBS[1] {
                    1
                } else {
                    2
                };
                out[0] = THREE_POINT_OFFSETS[k] * magnitude;
            }
        }
    }
}

/// An objective paired with a noise model.
#[derive(Debug, Clone)]
pub struct GradientOracle {
    objective: Arc<Objective>,
    noise: NoiseModel,
}

impl GradientOracle {
    pub fn new(objective: Arc<Objective>, noise: NoiseModel) -> Result<Self> {
        noise.validate(objective.dim())?;
        Ok(GradientOracle { objective, noise })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn objective_arc(&self) -> &Arc<Objective> {
        &self.objective
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// One stochastic gradient at `x`.
    pub fn sample_gradient(&self, x: &[f64], rng: &mut SimRng) -> Result<Vector> {
        let mut grad = vec![0.0; self.dim()];
        self.objective.grad_into(x, &mut grad)?;
        let mut noise = vec![0.0; self.dim()];
        self.noise.sample_into(rng, &mut noise);
        for (g, n) in grad.iter_mut().zip(&noise) {
            *g += n;
        }
        Vector::new(grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnbiasedAudit {
    /// `‖(1/n) Σ gᵢ − ∇f(x)‖`.
    pub deviation: f64,
    /// Root mean squared noise norm over the sample, `√((1/n) Σ ‖gᵢ − ∇f(x)‖²)`.
    pub noise_rms: f64,
    pub n: usize,
}

/// Monte Carlo check of `E[g(x, ξ)] = ∇f(x)`.
pub fn check_unbiased(
    oracle: &GradientOracle,
    x: &[f64],
    n: usize,
    rng: &mut SimRng,
) -> Result<UnbiasedAudit> {
    if n < 1000 {
        return Err(Error::config("n", format!("need at least 1000 samples, got {n}")));
    }
    let d = oracle.dim();
    let grad = oracle.objective().grad(x)?;
    let mut sum = vec![0.0; d];
    let mut sq = 0.0;
    for _ in 0..n {
        let g = oracle.sample_gradient(x, rng)?;
        for i in 0..d {
            sum[i] += g[i];
        }
        sq += vector::dist_sq(g.as_slice(), grad.as_slice());
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    Ok(UnbiasedAudit {
        deviation: vector::dist_sq(&mean, grad.as_slice()).sqrt(),
        noise_rms: (sq / n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    /// Monte Carlo estimate of `E[exp(‖ξ‖²/σ²)]`, `+∞` on overflow.
    pub value: f64,
    /// Set when some term overflowed; `sigma_claim` is too small.
    pub overflowed: bool,
    pub n: usize,
}

/// Monte Carlo estimate of the sub-Gaussian moment `E[exp(‖ξ‖²/σ²)]` for a
/// claimed `σ`.
pub fn check_subgaussian_moment(
    noise: &NoiseModel,
    dim: usize,
    sigma_claim: f64,
    n: usize,
    rng: &mut SimRng,
) -> Result<MomentEstimate> {
    if matches!(noise, NoiseModel::None) {
        return Err(Error::config("noise.kind", "moment check needs a non-trivial noise model"));
    }
    if n < 10_000 {
        return Err(Error::config("n", format!("need at least 10000 samples, got {n}")));
    }
    noise.validate(dim)?;
    let mut buf = vec![0.0; dim];
    let mut acc = 0.0;
    for _ in 0..n {
        noise.sample_into(rng, &mut buf);
        let term = (vector::norm_sq(&buf) / (sigma_claim * sigma_claim)).exp();
        if !term.is_finite() {
            return Ok(MomentEstimate {
                value: f64::INFINITY,
                overflowed: true,
                n,
            });
        }
        acc += term;
    }
    Ok(MomentEstimate {
        value: acc / n as f64,
        overflowed: false,
        n,
    })
}
