//! Randomized checks of the inequalities the convergence proofs rest on.
//!
//! Every check draws instances with magnitudes log-uniform over
//! `[1e-3, 1e3]` and sequence lengths uniform over `[1, 1000]`, evaluates
//! both sides and counts a violation whenever
//! `lhs > rhs + 1e-9 · (1 + |rhs|)`.
//!
//! Lemmas with an implicit premise (`solvex`, `logsolvex`) are tested at the
//! largest point satisfying the premise, located by bisection.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::problems::{make_logistic, make_quadratic, make_smooth_nonconvex, Objective};
use crate::rng::SimRng;
use crate::vector::{self, Vector};

pub const MIN_INSTANCES: usize = 10_000;
pub const TOLERANCE: f64 = 1e-9;
/// Vacuous draws are redrawn, up to this many draws per requested instance.
const MAX_DRAWS_PER_INSTANCE: usize = 10;
const MAG_LO: f64 = 1e-3;
const MAG_HI: f64 = 1e3;
const MAX_LEN: u64 = 1000;
/// Exponents are drawn log-uniform over `[1e-3, 10]`; larger exponents only
/// push both sides of the power-law lemmas to 0 or ∞.
const EXP_HI: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// `Σ a_t/(a₀+Σ_{i≤t} aᵢ)^β ≤ 1/((β−1) a₀^{β−1})` for `β > 1`.
    SumBounded,
    /// `Σ a_t f(a₀+Σ_{i≤t} aᵢ) ≤ ∫_{a₀}^{a₀+Σaᵢ} f` for nonincreasing `f ≥ 0`.
    SumIntegral,
    /// `‖∇f(x)‖² ≤ 2M (f(x) − f*)`.
    Smooth,
    /// `x ≤ C(A+Bx)^{½+ε}` implies
    /// `x < max([C(2B)^{½+ε}]^{1/(½−ε)}, C(2A)^{½+ε})`.
    Solvex,
    /// `x² ≤ (A+Bx)(C+D ln(A+Bx))` implies
    /// `x < 32B³D² + 2BC + 8B²D√C + A/B`.
    Logsolvex,
    /// `(x+y)^p ≤ x^p + y^p` for `p ∈ [0, 1]`.
    Exponential,
    /// `ln x ≤ α(x^{1/α} − 1)`.
    BoundLog,
}

impl Lemma {
    pub const ALL: [Lemma; 7] = [
        Lemma::SumBounded,
        Lemma::SumIntegral,
        Lemma::Smooth,
        Lemma::Solvex,
        Lemma::Logsolvex,
        Lemma::Exponential,
        Lemma::BoundLog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::SumBounded => "sum_bounded",
            Lemma::SumIntegral => "sum_integral",
            Lemma::Smooth => "smooth",
            Lemma::Solvex => "solvex",
            Lemma::Logsolvex => "logsolvex",
            Lemma::Exponential => "exponential",
            Lemma::BoundLog => "bound_log",
        }
    }

    pub fn from_name(name: &str) -> Option<Lemma> {
        Lemma::ALL.into_iter().find(|l| l.name() == name)
    }

    fn stream(self) -> u64 {
        Lemma::ALL.iter().position(|&l| l == self).expect("listed") as u64 + 1
    }
}

/// One evaluated instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

impl Instance {
    fn new(params: &[(&str, f64)], lhs: f64, rhs: f64) -> Instance {
        Instance {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            sequence: None,
            lhs,
            rhs,
        }
    }

    fn with_sequence(mut self, seq: Vec<f64>) -> Instance {
        self.sequence = Some(seq);
        self
    }

    /// NaN on either side counts as a violation.
    pub fn is_violation(&self) -> bool {
        let bound = self.rhs + TOLERANCE * (1.0 + self.rhs.abs());
        !matches!(self.lhs.partial_cmp(&bound), Some(Ordering::Less | Ordering::Equal))
    }

    /// `(lhs − rhs)/(1 + |rhs|)`; `−∞` when the right side is infinite.
    pub fn excess(&self) -> f64 {
        if self.rhs.is_infinite() && self.lhs.is_finite() {
            return f64::NEG_INFINITY;
        }
        (self.lhs - self.rhs) / (1.0 + self.rhs.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaResult {
    pub lemma: Lemma,
    /// Instances evaluated.
    pub instances: usize,
    /// Draws whose premise admits no point; redrawn, not evaluated.
    pub vacuous: usize,
    pub violations: usize,
    /// Largest `(lhs − rhs)/(1 + |rhs|)` seen.
    pub worst_excess: f64,
    /// First violating instance, if any.
    pub counterexample: Option<Instance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub n_instances: usize,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injected_fault: Option<Lemma>,
    pub results: Vec<LemmaResult>,
}

impl LemmaReport {
    pub fn violations(&self) -> usize {
        self.results.iter().map(|r| r.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    /// Every lemma reached the requested number of evaluated instances.
    pub fn complete(&self) -> bool {
        self.results.iter().all(|r| r.instances >= self.n_instances)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "lemma checks: seed={} instances/lemma={} tolerance={:e}",
            self.seed, self.n_instances, self.tolerance
        );
        if let Some(l) = self.injected_fault {
            let _ = writeln!(out, "injected wrong rhs: {}", l.name());
        }
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<12} instances={:<6} vacuous={:<5} violations={:<5} worst_excess={:.3e}",
                r.lemma.name(),
                r.instances,
                r.vacuous,
                r.violations,
                r.worst_excess
            );
            if let Some(c) = &r.counterexample {
                let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
                let _ = writeln!(
                    out,
                    "  counterexample: {} lhs={:e} rhs={:e}{}",
                    params.join(" "),
                    c.lhs,
                    c.rhs,
                    c.sequence
                        .as_ref()
                        .map(|s| format!(" sequence_len={}", s.len()))
                        .unwrap_or_default()
                );
            }
        }
        let _ = writeln!(
            out,
            "{}",
            if self.passed() { "PASS: no violations" } else { "FAIL: violations found" }
        );
        out
    }
}

/// Settings of a lemma-check run.
#[derive(Debug, Clone, Copy)]
pub struct LemmaCheck {
    pub seed: u64,
    pub n_instances: usize,
    pub execution: Execution,
    /// Test hook: replaces the right side of this lemma by `lhs − 1`.
    pub inject_wrong_rhs: Option<Lemma>,
}

impl LemmaCheck {
    pub fn new(seed: u64, n_instances: usize) -> Self {
        LemmaCheck {
            seed,
            n_instances,
            execution: Execution::default(),
            inject_wrong_rhs: None,
        }
    }

    pub fn run(&self) -> Result<LemmaReport> {
        if self.n_instances < MIN_INSTANCES {
            return Err(Error::config(
                "n",
                format!("need at least {MIN_INSTANCES} instances per lemma, got {}", self.n_instances),
            ));
        }
        let pool = objective_pool(self.seed)?;
        let results = parallel::map_ordered(&Lemma::ALL, self.execution, |&lemma| {
            self.run_lemma(lemma, &pool)
        });
        Ok(LemmaReport {
            seed: self.seed,
            n_instances: self.n_instances,
            tolerance: TOLERANCE,
            injected_fault: self.inject_wrong_rhs,
            results,
        })
    }

    fn run_lemma(&self, lemma: Lemma, pool: &[Arc<Objective>]) -> LemmaResult {
        let mut rng = SimRng::new(self.seed, lemma.stream());
        let mut result = LemmaResult {
            lemma,
            instances: 0,
            vacuous: 0,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
            counterexample: None,
        };
        let max_draws = self.n_instances.saturating_mul(MAX_DRAWS_PER_INSTANCE);
        let mut draws = 0;
        while result.instances < self.n_instances && draws < max_draws {
            draws += 1;
            let drawn = match lemma {
                Lemma::SumBounded => Some(sum_bounded(&mut rng)),
                Lemma::SumIntegral => Some(sum_integral(&mut rng)),
                Lemma::Smooth => Some(smooth(&mut rng, pool)),
                Lemma::Solvex => Some(solvex(&mut rng)),
                Lemma::Logsolvex => logsolvex(&mut rng),
                Lemma::Exponential => Some(exponential(&mut rng)),
                Lemma::BoundLog => Some(bound_log(&mut rng)),
            };
            let Some(mut inst) = drawn else {
                result.vacuous += 1;
                continue;
            };
            if self.inject_wrong_rhs == Some(lemma) {
                inst.rhs = inst.lhs - 1.0;
            }
            result.instances += 1;
            let excess = inst.excess();
            if excess > result.worst_excess || excess.is_nan() {
                result.worst_excess = excess;
            }
            if inst.is_violation() {
                result.violations += 1;
                if result.counterexample.is_none() {
                    result.counterexample = Some(inst);
                }
            }
        }
        result
    }
}

/// Runs all seven checks with `n_instances` each.
pub fn lemma_checks(seed: u64, n_instances: usize) -> Result<LemmaReport> {
    LemmaCheck::new(seed, n_instances).run()
}

fn magnitude(rng: &mut SimRng) -> f64 {
    rng.log_uniform(MAG_LO, MAG_HI)
}

fn sequence(rng: &mut SimRng) -> Vec<f64> {
    let n = rng.int_in(1, MAX_LEN);
    (0..n)
        .map(|_| if rng.uniform() < 0.1 { 0.0 } else { magnitude(rng) })
        .collect()
}

fn sum_bounded(rng: &mut SimRng) -> Instance {
    let a0 = magnitude(rng);
    let beta = 1.0 + rng.log_uniform(MAG_LO, EXP_HI);
    let seq = sequence(rng);
    let mut s = a0;
    let mut lhs = 0.0;
    for &a in &seq {
        s += a;
        lhs += a / s.powf(beta);
    }
    let rhs = 1.0 / ((beta - 1.0) * a0.powf(beta - 1.0));
    Instance::new(&[("a0", a0), ("beta", beta)], lhs, rhs).with_sequence(seq)
}

/// `∫_{a₀}^{a₀+S} x^{−β} dx`, stable near `β = 1`.
fn power_integral(a0: f64, total: f64, beta: f64) -> f64 {
    let log_ratio = (total / a0).ln_1p();
    if beta == 1.0 {
        log_ratio
    } else {
        let e = 1.0 - beta;
        a0.powf(e) * (e * log_ratio).exp_m1() / e
    }
}

fn sum_integral(rng: &mut SimRng) -> Instance {
    let a0 = magnitude(rng);
    let beta = if rng.uniform() < 0.5 {
        rng.log_uniform(MAG_LO, EXP_HI)
    } else {
        1.0
    };
    let seq = sequence(rng);
    let mut s = a0;
    let mut lhs = 0.0;
    for &a in &seq {
        s += a;
        lhs += a * s.powf(-beta);
    }
    let total: f64 = seq.iter().sum();
    let rhs = power_integral(a0, total, beta);
    Instance::new(&[("a0", a0), ("beta", beta)], lhs, rhs).with_sequence(seq)
}

/// Suite objectives used by the smoothness check.
fn objective_pool(seed: u64) -> Result<Vec<Arc<Objective>>> {
    let mut rng = SimRng::new(seed, 0);
    let mut pool = Vec::new();
    for _ in 0..4 {
        let dim = rng.int_in(1, 10) as usize;
        let eig: Vec<f64> = (0..dim).map(|_| magnitude(&mut rng)).collect();
        let center = Vector::new((0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect())?;
        pool.push(Arc::new(make_quadratic(dim, &eig, &center, rng.int_in(0, u64::MAX - 1))?));
    }
    for _ in 0..2 {
        let dim = rng.int_in(2, 5) as usize;
        pool.push(Arc::new(make_logistic(dim, 60, rng.int_in(0, u64::MAX - 1))?));
    }
    for _ in 0..2 {
        pool.push(Arc::new(make_smooth_nonconvex(rng.int_in(1, 10) as usize)?));
    }
    Ok(pool)
}

fn smooth(rng: &mut SimRng, pool: &[Arc<Objective>]) -> Instance {
    let k = rng.int_in(0, pool.len() as u64 - 1) as usize;
    let obj = &pool[k];
    let d = obj.dim();
    let mut dir: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let norm = vector::norm_sq(&dir).sqrt();
    let radius = magnitude(rng);
    let center = obj.constants().x_star.as_ref().map(|v| v.as_slice().to_vec());
    for (j, v) in dir.iter_mut().enumerate() {
        *v = center.as_ref().map_or(0.0, |c| c[j]) + radius * *v / norm;
    }
    let mut grad = vec![0.0; d];
    let f = obj.value_and_grad(&dir, &mut grad);
    let lhs = vector::norm_sq(&grad);
    let rhs = 2.0 * obj.smoothness() * (f - obj.f_star());
    Instance::new(
        &[("objective", k as f64), ("radius", radius), ("smoothness", obj.smoothness())],
        lhs,
        rhs,
    )
}

/// Largest `x` with `h(x) ≤ 0` in `[lo, hi]`, given `h(lo) ≤ 0 < h(hi)` and a
/// single sign change in between.
fn bisect_last_feasible(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi {
            break;
        }
        if h(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Doubles `start` until `pred` holds.
fn grow_until(start: f64, pred: impl Fn(f64) -> bool) -> Option<f64> {
    let mut x = start.max(f64::MIN_POSITIVE);
    for _ in 0..2200 {
        if pred(x) {
            return Some(x);
        }
        x *= 2.0;
        if !x.is_finite() {
            return None;
        }
    }
    None
}

fn solvex(rng: &mut SimRng) -> Instance {
    let a = if rng.uniform() < 0.05 { 0.0 } else { magnitude(rng) };
    let b = magnitude(rng);
    let c = magnitude(rng);
    let eps = rng.uniform_in(0.0, 0.45);
    let p = 0.5 + eps;
    // h is convex with h(0) ≤ 0, so the premise holds exactly on [0, x_max]
    let h = |x: f64| x - c * (a + b * x).powf(p);
    let hi = grow_until(1.0, |x| h(x) > 0.0).expect("h grows linearly");
    let x = bisect_last_feasible(h, 0.0, hi);
    let rhs = (c * (2.0 * b).powf(p)).powf(1.0 / (0.5 - eps)).max(c * (2.0 * a).powf(p));
    Instance::new(&[("a", a), ("b", b), ("c", c), ("epsilon", eps), ("x", x)], x, rhs)
}

fn logsolvex(rng: &mut SimRng) -> Option<Instance> {
    let a = magnitude(rng);
    let b = magnitude(rng);
    let c = magnitude(rng);
    let d = magnitude(rng);
    // in u = A + Bx the premise reads h(u) ≤ 0; h is concave below DB²/2
    // and convex above
    let h = |u: f64| {
        let x = (u - a) / b;
        x * x - u * (c + d * u.ln())
    };
    let dh = |u: f64| 2.0 * (u - a) / (b * b) - c - d * (u.ln() + 1.0);
    let u0 = a.max(0.5 * d * b * b);
    let in_convex_part = |from: f64| -> Option<f64> {
        let hi = grow_until(from * 2.0, |u| h(u) > 0.0)?;
        Some(bisect_last_feasible(h, from, hi))
    };
    let u = if h(u0) <= 0.0 {
        in_convex_part(u0)?
    } else {
        let convex_root = if dh(u0) < 0.0 {
            let hi = grow_until(u0 * 2.0, |u| dh(u) >= 0.0)?;
            let u_min = bisect_last_feasible(dh, u0, hi);
            if h(u_min) <= 0.0 {
                in_convex_part(u_min)
            } else {
                None
            }
        } else {
            None
        };
        match convex_root {
            Some(u) => u,
            None if u0 > a && h(a) <= 0.0 => bisect_last_feasible(h, a, u0),
            None => return None,
        }
    };
    let x = (u - a) / b;
    let rhs = 32.0 * b.powi(3) * d * d + 2.0 * b * c + 8.0 * b * b * d * c.sqrt() + a / b;
    Some(Instance::new(&[("a", a), ("b", b), ("c", c), ("d", d), ("x", x)], x, rhs))
}

fn exponential(rng: &mut SimRng) -> Instance {
    let draw = |rng: &mut SimRng| if rng.uniform() < 0.05 { 0.0 } else { magnitude(rng) };
    let x = draw(rng);
    let y = draw(rng);
    let p = match rng.uniform() {
        u if u < 0.02 => 0.0,
        u if u < 0.04 => 1.0,
        _ => rng.uniform(),
    };
    Instance::new(&[("x", x), ("y", y), ("p", p)], (x + y).powf(p), x.powf(p) + y.powf(p))
}

fn bound_log(rng: &mut SimRng) -> Instance {
    let x = magnitude(rng);
    let alpha = magnitude(rng);
    let rhs = alpha * (x.ln() / alpha).exp_m1();
    Instance::new(&[("x", x), ("alpha", alpha)], x.ln(), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_bounded_hand_example() {
        let lhs: f64 = 1.0 / 4.0 + 1.0 / 9.0;
        assert!((lhs - 0.3611).abs() < 1e-4);
        assert!(lhs <= 1.0 / ((2.0 - 1.0) * 1f64.powf(1.0)));
    }

    #[test]
    fn power_integral_matches_closed_forms() {
        assert!((power_integral(1.0, 1.0, 2.0) - 0.5).abs() < 1e-15);
        assert!((power_integral(2.0, 2.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        let near = power_integral(2.0, 2.0, 1.0 + 1e-12);
        assert!((near - 2f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn solvex_with_zero_a() {
        // x ≤ C(Bx)^p has largest solution [C B^p]^{1/(1−p)}
        let (b, c, p) = (2.0f64, 3.0f64, 0.6f64);
        let h = |x: f64| x - c * (b * x).powf(p);
        let x = bisect_last_feasible(h, 0.0, grow_until(1.0, |x| h(x) > 0.0).unwrap());
        let closed = (c * b.powf(p)).powf(1.0 / (1.0 - p));
        assert!((x - closed).abs() <= 1e-10 * closed);
        assert!(x < (c * (2.0 * b).powf(p)).powf(1.0 / (1.0 - p)));
    }

    #[test]
    fn exponential_hand_example() {
        assert!(2f64.sqrt() <= 2.0);
    }

    #[test]
    fn too_few_instances_is_a_config_error() {
        assert!(matches!(lemma_checks(1, 10), Err(Error::Config { .. })));
    }

    #[test]
    fn names_round_trip() {
        for l in Lemma::ALL {
            assert_eq!(Lemma::from_name(l.name()), Some(l));
        }
    }
}
