//! Explicit convergence bounds for SGD with global AdaGrad stepsizes.
//!
//! Both evaluators use the constants of the proofs rather than the `O(·)`
//! forms of the statements. With `Δ = Σ_{t≤T} δ_t`:
//!
//! * convex: `E[(f(x̄_T) − f*)^(½−ε)] ≤ RHS`, valid when `4αM < β^(½+ε)`;
//! * nonconvex: `E[min_t ‖∇f(x_t)‖^(1−2ε)] ≤ RHS`, valid when
//!   `2αM < β^(½+ε)`.
//!
//! A confidence transform turns `E[X^(½−ε)] ≤ RHS` into
//! `P(X ≤ (RHS/δ)^(1/(½−ε))) ≥ 1 − δ` by Markov's inequality.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::{self, RunConfig};
use crate::oracle::{GradientOracle, NoiseModel};
use crate::parallel::{self, Execution};
use crate::problems::Objective;
use crate::stats::MeanEstimate;
use crate::stepsize::StepsizeConfig;
use crate::vector::{self, Vector};

/// Confidence levels of the Markov transform.
pub const CONFIDENCE_DELTAS: [f64; 3] = [0.5, 0.1, 0.05];

/// Standard errors of slack granted to the Monte Carlo side.
pub const SE_SLACK: f64 = 3.0;

/// Minimum number of runs behind an empirical bound check.
pub const MIN_RUNS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Bound on `E[(f(x̄_T) − f*)^(½−ε)]`.
    Convex,
    /// Bound on `E[min_t ‖∇f(x_t)‖^(1−2ε)]`.
    Nonconvex,
}

impl Theorem {
    /// Name of the quantity `X` whose `(½−ε)` power is bounded.
    pub fn metric(self) -> &'static str {
        match self {
            Theorem::Convex => "f_gap_avg",
            Theorem::Nonconvex => "best_grad_norm_sq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Smoothness constant `M`.
    pub smoothness: f64,
    /// Noise level `σ`.
    pub sigma: f64,
    pub horizon: u64,
}

impl BoundParams {
    fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("smoothness", self.smoothness)?;
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(Error::config("epsilon", format!("must lie in [0, 0.5], got {}", self.epsilon)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma", format!("must be non-negative, got {}", self.sigma)));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        Ok(())
    }
}

/// Auxiliary constants of the `ε = 0` branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBranchConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceBound {
    pub delta: f64,
    /// Bound on `X` holding with probability at least `1 − δ`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEvaluation {
    pub theorem: Theorem,
    pub params: BoundParams,
    /// `‖x_1 − x*‖` for the convex bound, `f(x_1) − f*` for the nonconvex one.
    pub initial: f64,
    /// Reason the parameters fall outside the theorem, if they do.
    pub invalid_regime: Option<String>,
    pub gamma: Option<f64>,
    pub k: Option<f64>,
    pub log_branch: Option<LogBranchConstants>,
    pub rhs: Option<f64>,
    pub confidence: Vec<ConfidenceBound>,
}

impl BoundEvaluation {
    pub fn is_valid(&self) -> bool {
        self.invalid_regime.is_none()
    }

    fn invalid(theorem: Theorem, params: BoundParams, initial: f64, reason: String) -> Self {
        BoundEvaluation {
            theorem,
            params,
            initial,
            invalid_regime: Some(reason),
            gamma: None,
            k: None,
            log_branch: None,
            rhs: None,
            confidence: Vec::new(),
        }
    }

    fn valid(
        theorem: Theorem,
        params: BoundParams,
        initial: f64,
        gamma: f64,
        k: f64,
        log_branch: Option<LogBranchConstants>,
        rhs: f64,
    ) -> Self {
        let q = 0.5 - params.epsilon;
        let confidence = CONFIDENCE_DELTAS
            .iter()
            .map(|&delta| ConfidenceBound {
                delta,
                bound: (rhs / delta).powf(1.0 / q),
            })
            .collect();
        BoundEvaluation {
            theorem,
            params,
            initial,
            invalid_regime: None,
            gamma: Some(gamma),
            k: Some(k),
            log_branch,
            rhs: Some(rhs),
            confidence,
        }
    }
}

fn check_regime(p: &BoundParams, factor: f64, theorem: Theorem, initial: f64) -> Option<BoundEvaluation> {
    let lhs = factor * p.alpha * p.smoothness;
    let rhs = p.beta.powf(0.5 + p.epsilon);
    if p.epsilon >= 0.5 {
        return Some(BoundEvaluation::invalid(
            theorem,
            *p,
            initial,
            "the bound needs epsilon < 1/2".into(),
        ));
    }
    if lhs >= rhs {
        return Some(BoundEvaluation::invalid(
            theorem,
            *p,
            initial,
            format!("{factor}·alpha·M = {lhs:e} is not below beta^(1/2+epsilon) = {rhs:e}"),
        ));
    }
    None
}

/// `D ln(2A + 32B⁴D² + 2B²C + 8B³D√C)`.
fn log_branch_k(c: &LogBranchConstants) -> f64 {
    let LogBranchConstants { a, b, c, d } = *c;
    d * (2.0 * a + 32.0 * b.powi(4) * d * d + 2.0 * b * b * c + 8.0 * b.powi(3) * d * c.sqrt()).ln()
}

/// Bound for convex `M`-smooth objectives.
pub fn theorem_convex_bound(p: &BoundParams, x0_dist: f64) -> Result<BoundEvaluation> {
    p.validate()?;
    if !(x0_dist >= 0.0 && x0_dist.is_finite()) {
        return Err(Error::config("x0_dist", format!("must be non-negative, got {x0_dist}")));
    }
    if let Some(invalid) = check_regime(p, 4.0, Theorem::Convex, x0_dist) {
        return Ok(invalid);
    }
    let BoundParams { alpha, beta, epsilon, smoothness: m, sigma, horizon } = *p;
    let t = horizon as f64;
    let log_t = 1.0 + t.ln();
    let ratio = 4.0 * alpha * m / beta.powf(0.5 + epsilon);
    let denom = alpha * (1.0 - ratio);
    let (k, log_branch) = if epsilon > 0.0 {
        ((alpha * alpha / (2.0 * epsilon * beta.powf(2.0 * epsilon))) / denom, None)
    } else {
        let c = LogBranchConstants {
            a: (beta + 2.0 * t * sigma * sigma).sqrt(),
            b: 2.0 * m.sqrt(),
            d: alpha / (1.0 - ratio),
            c: (beta * x0_dist * x0_dist + 4.0 * alpha * alpha * log_t * sigma * sigma)
                / (2.0 * alpha * beta * (1.0 - ratio)),
        };
        (log_branch_k(&c), Some(c))
    };
    let gamma = (x0_dist * x0_dist + 4.0 * alpha * alpha / beta.powf(1.0 + 2.0 * epsilon) * log_t * sigma * sigma)
        / denom
        + k;
    let q = 0.5 - epsilon;
    let s = 0.5 + epsilon;
    let first = 2f64.powf(s / q) * (4.0 * m).powf(s) * gamma;
    let second = 2f64.powf(s) * gamma.powf(q) * (beta + 2.0 * t * sigma * sigma).powf(0.25 - epsilon * epsilon);
    let rhs = first.max(second) / t.powf(q);
    Ok(BoundEvaluation::valid(Theorem::Convex, *p, x0_dist, gamma, k, log_branch, rhs))
}

/// Bound for nonconvex `M`-smooth objectives.
pub fn theorem_nonconvex_bound(p: &BoundParams, f_gap0: f64) -> Result<BoundEvaluation> {
    p.validate()?;
    if !(f_gap0 >= 0.0 && f_gap0.is_finite()) {
        return Err(Error::config("f_gap0", format!("must be non-negative, got {f_gap0}")));
    }
    if let Some(invalid) = check_regime(p, 2.0, Theorem::Nonconvex, f_gap0) {
        return Ok(invalid);
    }
    let BoundParams { alpha, beta, epsilon, smoothness: m, sigma, horizon } = *p;
    let t = horizon as f64;
    let log_t = 1.0 + t.ln();
    let ratio = 2.0 * alpha * m / beta.powf(0.5 + epsilon);
    let denom = alpha * (1.0 - ratio);
    let (k, log_branch) = if epsilon > 0.0 {
        ((alpha * alpha * m / (4.0 * epsilon * beta.powf(2.0 * epsilon))) / denom, None)
    } else {
        let c = LogBranchConstants {
            a: (beta + 2.0 * t * sigma * sigma).sqrt(),
            b: 2f64.sqrt(),
            d: alpha * m / (1.0 - ratio),
            c: (beta * f_gap0 + 2.0 * alpha * log_t * sigma * sigma) / (alpha * beta * (1.0 - ratio)),
        };
        (log_branch_k(&c), Some(c))
    };
    let gamma = (f_gap0 + 2.0 * alpha * alpha * m / beta.powf(1.0 + 2.0 * epsilon) * sigma * sigma * log_t) / denom + k;
    let q = 0.5 - epsilon;
    let s = 0.5 + epsilon;
    let first = 2f64.powf(s / q) * gamma;
    let second = 2f64.powf(s) * (beta + 2.0 * t * sigma * sigma).powf(0.25 - epsilon * epsilon) * gamma.powf(q);
    let rhs = first.max(second) / t.powf(q);
    Ok(BoundEvaluation::valid(Theorem::Nonconvex, *p, f_gap0, gamma, k, log_branch, rhs))
}

/// Empirical quantile of `X` next to its Markov bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileComparison {
    pub delta: f64,
    pub markov_bound: f64,
    /// Empirical `(1 − δ)`-quantile of `X`; a plain statistic, no coverage
    /// claim attached.
    pub empirical_quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub evaluation: BoundEvaluation,
    /// Monte Carlo estimate of `E[X^(½−ε)]`.
    pub lhs: MeanEstimate,
    pub rhs: f64,
    /// `lhs.mean ≤ rhs + 3·lhs.se`.
    pub satisfied: bool,
    pub quantiles: Vec<QuantileComparison>,
}

/// Empirical `q`-quantile by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Compares per-run samples of `X` (in ascending seed order) with an
/// evaluated bound.
pub fn bound_report_from_samples(evaluation: &BoundEvaluation, samples: &[f64]) -> Result<BoundReport> {
    let Some(rhs) = evaluation.rhs else {
        return Err(Error::InvalidRegime(
            evaluation.invalid_regime.clone().unwrap_or_default(),
        ));
    };
    if samples.is_empty() {
        return Err(Error::config("n_runs", "need at least one sample"));
    }
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::config("samples", format!("non-finite sample {v}")));
    }
    let q = 0.5 - evaluation.params.epsilon;
    // f_gap may dip below zero by rounding; the bounded quantity is nonnegative
    let powered: Vec<f64> = samples.iter().map(|&x| x.max(0.0).powf(q)).collect();
    let lhs = MeanEstimate::from_samples(&powered);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantiles = evaluation
        .confidence
        .iter()
        .map(|c| QuantileComparison {
            delta: c.delta,
            markov_bound: c.bound,
            empirical_quantile: quantile(&sorted, 1.0 - c.delta),
        })
        .collect();
    Ok(BoundReport {
        evaluation: evaluation.clone(),
        lhs,
        rhs,
        satisfied: lhs.mean <= rhs + SE_SLACK * lhs.se,
        quantiles,
    })
}

/// An experiment whose outcome is compared with a theorem bound.
#[derive(Debug, Clone)]
pub struct BoundSetup {
    pub objective: Arc<Objective>,
    pub noise: NoiseModel,
    /// Must be `GlobalAdagrad`.
    pub stepsize: StepsizeConfig,
    pub x0: Vector,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub execution: Execution,
}

impl BoundSetup {
    pub fn theorem(&self) -> Theorem {
        if self.objective.is_convex() {
            Theorem::Convex
        } else {
            Theorem::Nonconvex
        }
    }

    /// Evaluates the bound matching the objective, with `σ` taken as the
    /// noise model's sub-Gaussian constant.
    pub fn evaluate(&self) -> Result<BoundEvaluation> {
        let StepsizeConfig::GlobalAdagrad { alpha, beta, epsilon } = self.stepsize else {
            return Err(Error::config(
                "stepsize.variant",
                "theorem bounds are stated for global_adagrad",
            ));
        };
        let params = BoundParams {
            alpha,
            beta,
            epsilon,
            smoothness: self.objective.smoothness(),
            sigma: self.noise.subgaussian_constant(self.objective.dim()),
            horizon: self.horizon,
        };
        match self.theorem() {
            Theorem::Convex => {
                let x_star = self.objective.constants().x_star.as_ref().ok_or_else(|| {
                    Error::config("objective", "the convex bound needs a known minimizer")
                })?;
                let dist = vector::dist_sq(self.x0.as_slice(), x_star.as_slice()).sqrt();
                theorem_convex_bound(&params, dist)
            }
            Theorem::Nonconvex => theorem_nonconvex_bound(&params, self.objective.gap(self.x0.as_slice())?),
        }
    }
}

/// Runs every seed of `setup` and compares the Monte Carlo mean of
/// `X^(½−ε)` with the evaluated bound.
pub fn check_bound_empirically(setup: &BoundSetup) -> Result<BoundReport> {
    let evaluation = setup.evaluate()?;
    if let Some(reason) = &evaluation.invalid_regime {
        return Err(Error::InvalidRegime(reason.clone()));
    }
    let mut seeds = setup.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.len() < MIN_RUNS {
        return Err(Error::config(
            "n_runs",
            format!("need at least {MIN_RUNS} distinct seeds, got {}", seeds.len()),
        ));
    }
    let oracle = GradientOracle::new(setup.objective.clone(), setup.noise)?;
    let theorem = evaluation.theorem;
    let results = parallel::map_seeds(&seeds, setup.execution, |seed| -> Result<f64> {
        let cfg = RunConfig::new(oracle.clone(), setup.stepsize, setup.x0.clone(), setup.horizon, seed)
            .with_record_stride(setup.horizon);
        let traj = optimizer::run(&cfg)?;
        let sel = match theorem {
            Theorem::Convex => traj.select(optimizer::Selector::Average)?.f_gap,
            Theorem::Nonconvex => traj.select(optimizer::Selector::BestGradient)?.grad_norm_sq,
        };
        Ok(sel)
    });
    let samples = results
        .into_iter()
        .map(|(_, r)| r)
        .collect::<Result<Vec<f64>>>()?;
    bound_report_from_samples(&evaluation, &samples)
}
