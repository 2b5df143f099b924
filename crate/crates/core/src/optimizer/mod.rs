//! The SGD loop `x_{t+1} = x_t − η_t ⊙ g(x_t, ξ_t)`.
//!
//! A run keeps exact online aggregates over every iteration (running sum of
//! iterates, best true gradient, the liminf statistic, inner-product sums
//! used by the descent checks) and records full metrics only on a sparse
//! checkpoint grid, so memory stays bounded for long horizons.

pub mod biased;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{GradientOracle, NoiseModel};
use crate::problems::{Objective, ObjectiveKind};
use crate::rng::SimRng;
use crate::stepsize::{StepsizeConfig, StepsizeState};
use crate::vector::{self, Vector};

/// Upper bound on the number of points in the strided part of the grid.
pub const MAX_STRIDED_CHECKPOINTS: u64 = 10_000;

/// Ratio of the geometric part of the checkpoint grid.
pub const GEOMETRIC_RATIO: f64 = 1.258_925_411_794_167_2; // 10^(1/10)

/// RNG stream carrying the gradient noise of a run.
pub const NOISE_STREAM: u64 = 0;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub oracle: GradientOracle,
    pub stepsize: StepsizeConfig,
    pub x0: Vector,
    pub horizon: u64,
    pub seed: u64,
    pub record_stride: u64,
    /// Prefix lengths at which horizon snapshots are taken.
    pub horizons: Vec<u64>,
}

impl RunConfig {
    pub fn new(oracle: GradientOracle, stepsize: StepsizeConfig, x0: Vector, horizon: u64, seed: u64) -> Self {
        RunConfig {
            oracle,
            stepsize,
            x0,
            horizon,
            seed,
            record_stride: 1,
            horizons: Vec::new(),
        }
    }

    pub fn with_record_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_horizons(mut self, horizons: Vec<u64>) -> Self {
        self.horizons = horizons;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        if self.x0.dim() != self.oracle.dim() {
            return Err(Error::config(
                "x0",
                format!("expected dimension {}, got {}", self.oracle.dim(), self.x0.dim()),
            ));
        }
        validate_horizons(&self.horizons, self.horizon)?;
        self.stepsize.validate()
    }

    fn info(&self) -> RunInfo {
        let objective = self.oracle.objective();
        RunInfo {
            objective: objective.kind(),
            dim: objective.dim(),
            lipschitz: objective.constants().lipschitz,
            noise: self.oracle.noise(),
            stepsize: self.stepsize,
            seed: self.seed,
            horizon: self.horizon,
            record_stride: self.record_stride,
        }
    }
}

fn validate_horizons(horizons: &[u64], horizon: u64) -> Result<()> {
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("horizons", "must be strictly increasing"));
    }
    if let Some(&h) = horizons.first() {
        if h == 0 {
            return Err(Error::config("horizons", "must be at least 1"));
        }
    }
    if let Some(&h) = horizons.last() {
        if h > horizon {
            return Err(Error::config(
                "horizons",
                format!("largest horizon {h} exceeds the run length {horizon}"),
            ));
        }
    }
    Ok(())
}

/// Iterations recorded for a run of length `horizon`.
///
/// The union of `1, 1+k, 1+2k, …` with `k` widened so that at most
/// [`MAX_STRIDED_CHECKPOINTS`] points are produced, the geometric grid
/// `⌊r^j⌋`, `horizon/100`, `horizon` and the snapshot horizons.
pub fn checkpoint_grid(horizon: u64, record_stride: u64, horizons: &[u64]) -> Vec<u64> {
    let stride = record_stride
        .max(1)
        .max(horizon.div_ceil(MAX_STRIDED_CHECKPOINTS));
    let mut grid: Vec<u64> = (1..=horizon).step_by(stride as usize).collect();
    let mut r = 1.0f64;
    while (r as u64) <= horizon {
        grid.push(r as u64);
        r *= GEOMETRIC_RATIO;
    }
    if horizon >= 100 {
        grid.push(horizon / 100);
    }
    grid.push(horizon);
    grid.extend(horizons.iter().copied().filter(|&h| h >= 1 && h <= horizon));
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Static description of a run, kept with its trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub objective: ObjectiveKind,
    pub dim: usize,
    pub lipschitz: Option<f64>,
    pub noise: NoiseModel,
    pub stepsize: StepsizeConfig,
    pub seed: u64,
    pub horizon: u64,
    pub record_stride: u64,
}

/// Metrics of the iterate `x_t` and the stepsize applied at step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub f_gap: f64,
    pub grad_norm_sq: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    /// `min_{s≤t} ‖∇f(x_s)‖² s^(½−ε)`.
    pub liminf_stat: f64,
}

/// Prefix metrics after the first `t` iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonSnapshot {
    pub t: u64,
    /// `f(x̄_t) − f*` with `x̄_t` the mean of `x_1, …, x_t`.
    pub f_gap_avg: f64,
    /// `f(x_t) − f*`.
    pub f_gap_last: f64,
    /// `min_{s≤t} ‖∇f(x_s)‖²`.
    pub best_grad_norm_sq: f64,
    /// `(1/t) Σ_{s≤t} (f(x_s) − f*)`.
    pub mean_f_gap: f64,
    /// `(1/t) Σ_{s≤t} ‖∇f(x_s)‖²`.
    pub mean_grad_norm_sq: f64,
    pub liminf_stat: f64,
}

/// Sums over all completed steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunSums {
    /// `Σ_t ⟨∇f(x_t), η_t ⊙ ∇f(x_t)⟩`.
    pub descent: f64,
    /// `Σ_t ‖η_t ⊙ g_t‖²`.
    pub step_sq: f64,
    /// `Σ_t ‖η_{t+1} ⊙ g_t‖²`, the stepsize read after `g_t` is observed.
    pub lookahead_sq: f64,
    /// `Σ_t (f(x_t) − f*)`.
    pub f_gap: f64,
    /// `Σ_t ‖∇f(x_t)‖²`.
    pub grad_norm_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// The final iterate `x_T`.
    Last,
    /// `x̄_T = (1/T) Σ_{t≤T} x_t`.
    Average,
    /// The iterate with the smallest true gradient norm, earliest on ties.
    BestGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub which: Selector,
    /// Iteration index of the selected iterate; `None` for the average.
    pub t: Option<u64>,
    pub x: Vector,
    pub f_gap: f64,
    pub grad_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selections {
    pub last: Selection,
    pub average: Selection,
    pub best_gradient: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub info: RunInfo,
    /// Exponent `½ − ε` of the liminf statistic.
    pub liminf_exponent: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub snapshots: Vec<HorizonSnapshot>,
    pub sums: RunSums,
    /// `f(x_1) − f*`.
    pub initial_f_gap: f64,
    /// Number of completed steps.
    pub steps: u64,
    /// Step at which the run failed, if it did.
    pub failed_at: Option<u64>,
    /// `x_{T+1}`, produced by the last step but never evaluated.
    pub next_iterate: Option<Vec<f64>>,
    selections: Option<Selections>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failed_at.is_none()
    }

    pub fn select(&self, which: Selector) -> Result<Selection> {
        let s = self.selections.as_ref().ok_or(Error::IncompleteRun {
            failed_at: self.failed_at.unwrap_or(self.steps + 1),
        })?;
        Ok(match which {
            Selector::Last => s.last.clone(),
            Selector::Average => s.average.clone(),
            Selector::BestGradient => s.best_gradient.clone(),
        })
    }

    pub fn selections(&self) -> Option<&Selections> {
        self.selections.as_ref()
    }

    pub fn final_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn checkpoint_at(&self, t: u64) -> Option<&Checkpoint> {
        self.checkpoints
            .binary_search_by_key(&t, |c| c.t)
            .ok()
            .map(|i| &self.checkpoints[i])
    }

    pub fn snapshot_at(&self, t: u64) -> Option<&HorizonSnapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }
}

/// A failed run: the error and, for numerical failures, everything
/// recorded before the failing step.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Option<Box<Trajectory>>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure { error, partial: None }
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {}

/// Per-step `(η_t, g_t)` of a run, plus the stepsize read after the last
/// observation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    /// `η_1, …, η_{T+1}`, one value per coordinate.
    pub eta: Vec<Vec<f64>>,
    /// `g_1, …, g_T`.
    pub gradients: Vec<Vec<f64>>,
}

/// Runs SGD with delayed stepsizes.
pub fn run(config: &RunConfig) -> std::result::Result<Trajectory, RunFailure> {
    run_inner(config, None)
}

/// Like [`run`], also returning every `(η_t, g_t)`. Memory grows with the
/// horizon; meant for short runs.
pub fn run_traced(config: &RunConfig) -> std::result::Result<(Trajectory, Trace), RunFailure> {
    let mut trace = Trace::default();
    let traj = run_inner(config, Some(&mut trace))?;
    Ok((traj, trace))
}

fn run_inner(config: &RunConfig, trace: Option<&mut Trace>) -> std::result::Result<Trajectory, RunFailure> {
    config.validate()?;
    let state = StepsizeState::new(config.stepsize, config.oracle.dim())?;
    let source = OracleSource {
        noise: config.oracle.noise(),
        rng: SimRng::new(config.seed, NOISE_STREAM),
    };
    drive(config, Delayed(state), source, trace)
}

/// Rebuilds a trajectory from recorded `(η_t, g_t)` pairs.
///
/// The update and all metrics are recomputed through the same code path as
/// [`run`], so a trace replayed with the run's settings reproduces its
/// checkpoints bit for bit.
pub fn replay(
    objective: Arc<Objective>,
    stepsize: StepsizeConfig,
    x0: Vector,
    trace: &Trace,
    record_stride: u64,
    horizons: Vec<u64>,
) -> std::result::Result<Trajectory, RunFailure> {
    let horizon = trace.gradients.len() as u64;
    if trace.eta.len() != trace.gradients.len() + 1 {
        return Err(Error::config("trace", "expected one more stepsize than gradients").into());
    }
    let dim = objective.dim();
    if trace.eta.iter().chain(&trace.gradients).any(|v| v.len() != dim) {
        return Err(Error::config("trace", format!("every entry must have dimension {dim}")).into());
    }
    let oracle = GradientOracle::new(objective, NoiseModel::None)?;
    let config = RunConfig::new(oracle, stepsize, x0, horizon, 0)
        .with_record_stride(record_stride)
        .with_horizons(horizons);
    config.validate()?;
    let rule = Recorded { eta: &trace.eta, t: 0 };
    let source = RecordedSource { gradients: &trace.gradients };
    drive(&config, rule, source, None)
}

/// Outcome of a twin run: the stepsize each twin applied at the fork step.
#[derive(Debug, Clone, PartialEq)]
pub struct Twin {
    pub fork_at: u64,
    pub eta_a: Vec<f64>,
    pub eta_b: Vec<f64>,
    pub g_a: Vec<f64>,
    pub g_b: Vec<f64>,
}

impl Twin {
    /// Both twins applied the same stepsize although they saw different
    /// gradients at the fork step.
    pub fn stepsize_blind_to_current_gradient(&self) -> bool {
        self.g_a != self.g_b && self.eta_a == self.eta_b
    }
}

/// Runs two copies of `config` that share noise before step `fork_at` and
/// draw independent noise at `fork_at`, then reports the stepsizes applied at
/// that step. Biased configurations run through the biased update.
pub fn no_peeking_twin(config: &RunConfig, fork_at: u64) -> Result<Twin> {
    if fork_at == 0 {
        return Err(Error::config("fork_at", "must be at least 1"));
    }
    if matches!(config.oracle.noise(), NoiseModel::None) {
        return Err(Error::config("noise", "twin runs need gradient noise"));
    }
    let mut cfg = config.clone();
    cfg.horizon = fork_at;
    cfg.horizons.clear();
    cfg.validate()?;
    let run_twin = |branch: u64| -> Result<(Vec<f64>, Vec<f64>)> {
        let source = ForkedSource {
            noise: cfg.oracle.noise(),
            main: SimRng::new(cfg.seed, NOISE_STREAM),
            alt: SimRng::new(cfg.seed, NOISE_STREAM + 1 + branch),
            fork_at,
        };
        let mut trace = Trace::default();
        if cfg.stepsize.is_biased() {
            let state = StepsizeState::new_unchecked(cfg.stepsize, cfg.oracle.dim())?;
            drive(&cfg, biased::Lookahead(state), source, Some(&mut trace))?;
        } else {
            let state = StepsizeState::new(cfg.stepsize, cfg.oracle.dim())?;
            drive(&cfg, Delayed(state), source, Some(&mut trace))?;
        }
        let k = fork_at as usize - 1;
        Ok((trace.eta.swap_remove(k), trace.gradients.swap_remove(k)))
    };
    let (eta_a, g_a) = run_twin(0)?;
    let (eta_b, g_b) = run_twin(1)?;
    Ok(Twin {
        fork_at,
        eta_a,
        eta_b,
        g_a,
        g_b,
    })
}

/// How the stepsize applied at a step is obtained.
pub(crate) trait StepRule {
    /// Writes the stepsize applied to `g` into `eta`, then advances.
    fn step(&mut self, t: u64, g: &[f64], eta: &mut [f64]) -> Result<()>;
    /// Stepsize that would be applied next.
    fn next(&self, j: usize) -> f64;
}

/// Reads `η_t` before observing `g_t`.
pub(crate) struct Delayed(pub(crate) StepsizeState);

impl StepRule for Delayed {
    fn step(&mut self, _t: u64, g: &[f64], eta: &mut [f64]) -> Result<()> {
        for (j, e) in eta.iter_mut().enumerate() {
            *e = self.0.coordinate(j);
        }
        self.0.observe(g)
    }

    fn next(&self, j: usize) -> f64 {
        self.0.coordinate(j)
    }
}

struct Recorded<'a> {
    eta: &'a [Vec<f64>],
    t: usize,
}

impl StepRule for Recorded<'_> {
    fn step(&mut self, _t: u64, _g: &[f64], eta: &mut [f64]) -> Result<()> {
        eta.copy_from_slice(&self.eta[self.t]);
        self.t += 1;
        Ok(())
    }

    fn next(&self, j: usize) -> f64 {
        self.eta[self.t][j]
    }
}

/// Source of stochastic gradients.
pub(crate) trait GradientSource {
    /// Writes `g_t` given the true gradient at `x_t`.
    fn gradient(&mut self, t: u64, grad: &[f64], out: &mut [f64]);
}

pub(crate) struct OracleSource {
    pub(crate) noise: NoiseModel,
    pub(crate) rng: SimRng,
}

impl GradientSource for OracleSource {
    fn gradient(&mut self, _t: u64, grad: &[f64], out: &mut [f64]) {
        self.noise.sample_into(&mut self.rng, out);
        for (o, g) in out.iter_mut().zip(grad) {
            *o += g;
        }
    }
}

struct RecordedSource<'a> {
    gradients: &'a [Vec<f64>],
}

impl GradientSource for RecordedSource<'_> {
    fn gradient(&mut self, t: u64, _grad: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.gradients[t as usize - 1]);
    }
}

/// Shares the main noise stream except at `fork_at`, which draws from `alt`.
struct ForkedSource {
    noise: NoiseModel,
    main: SimRng,
    alt: SimRng,
    fork_at: u64,
}

impl GradientSource for ForkedSource {
    fn gradient(&mut self, t: u64, grad: &[f64], out: &mut [f64]) {
        let rng = if t == self.fork_at { &mut self.alt } else { &mut self.main };
        self.noise.sample_into(rng, out);
        for (o, g) in out.iter_mut().zip(grad) {
            *o += g;
        }
    }
}

/// The loop shared by every entry point.
pub(crate) fn drive<R: StepRule, S: GradientSource>(
    config: &RunConfig,
    mut rule: R,
    mut source: S,
    mut trace: Option<&mut Trace>,
) -> std::result::Result<Trajectory, RunFailure> {
    let objective = config.oracle.objective();
    let f_star = objective.f_star();
    let d = objective.dim();
    let horizon = config.horizon;
    let exponent = 0.5 - config.stepsize.epsilon();
    let grid = checkpoint_grid(horizon, config.record_stride, &config.horizons);

    let mut x = config.x0.as_slice().to_vec();
    let mut grad = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut eta = vec![0.0; d];
    let mut sum_x = vec![0.0; d];
    let mut best_x = x.clone();
    let mut best = (0u64, f64::INFINITY);
    let mut liminf = f64::INFINITY;
    let mut sums = RunSums::default();
    let mut checkpoints = Vec::with_capacity(grid.len());
    let mut snapshots = Vec::with_capacity(config.horizons.len());
    let mut next_cp = 0usize;
    let mut next_snap = 0usize;
    let mut initial_f_gap = f64::NAN;
    let mut last: Option<(Vec<f64>, f64, f64)> = None;

    let mut traj = Trajectory {
        info: config.info(),
        liminf_exponent: exponent,
        checkpoints: Vec::new(),
        snapshots: Vec::new(),
        sums: RunSums::default(),
        initial_f_gap: f64::NAN,
        steps: 0,
        failed_at: None,
        next_iterate: None,
        selections: None,
    };

    for t in 1..=horizon {
        let f = objective.value_and_grad(&x, &mut grad);
        let gap = f - f_star;
        let gns = vector::norm_sq(&grad);
        let failure = if !vector::all_finite(&x) {
            Some("non-finite iterate")
        } else if !(gap.is_finite() && gns.is_finite()) {
            Some("non-finite objective value or gradient")
        } else {
            None
        };
        if let Some(detail) = failure {
            return Err(fail(traj, t, detail.into(), checkpoints, snapshots, sums, initial_f_gap));
        }
        if t == 1 {
            initial_f_gap = gap;
        }

        for (s, xi) in sum_x.iter_mut().zip(&x) {
            *s += xi;
        }
        if gns < best.1 {
            best = (t, gns);
            best_x.copy_from_slice(&x);
        }
        liminf = liminf.min(gns * (t as f64).powf(exponent));
        sums.f_gap += gap;
        sums.grad_norm_sq += gns;

        source.gradient(t, &grad, &mut g);
        if let Err(e) = rule.step(t, &g, &mut eta) {
            let detail = e.to_string();
            return Err(fail(traj, t, detail, checkpoints, snapshots, sums, initial_f_gap));
        }

        let mut descent = 0.0;
        let mut step_sq = 0.0;
        let mut lookahead_sq = 0.0;
        for j in 0..d {
            descent += eta[j] * grad[j] * grad[j];
            let s = eta[j] * g[j];
            step_sq += s * s;
            let n = rule.next(j) * g[j];
            lookahead_sq += n * n;
        }
        sums.descent += descent;
        sums.step_sq += step_sq;
        sums.lookahead_sq += lookahead_sq;

        if let Some(tr) = trace.as_deref_mut() {
            tr.eta.push(eta.clone());
            tr.gradients.push(g.clone());
        }

        if next_cp < grid.len() && grid[next_cp] == t {
            let (lo, hi) = eta
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
            checkpoints.push(Checkpoint {
                t,
                f_gap: gap,
                grad_norm_sq: gns,
                eta_min: lo,
                eta_max: hi,
                liminf_stat: liminf,
            });
            next_cp += 1;
        }
        if next_snap < config.horizons.len() && config.horizons[next_snap] == t {
            let avg: Vec<f64> = sum_x.iter().map(|s| s / t as f64).collect();
            snapshots.push(HorizonSnapshot {
                t,
                f_gap_avg: objective.value_unchecked(&avg) - f_star,
                f_gap_last: gap,
                best_grad_norm_sq: best.1,
                mean_f_gap: sums.f_gap / t as f64,
                mean_grad_norm_sq: sums.grad_norm_sq / t as f64,
                liminf_stat: liminf,
            });
            next_snap += 1;
        }
        if t == horizon {
            last = Some((x.clone(), gap, gns));
        }

        for j in 0..d {
            x[j] -= eta[j] * g[j];
        }
        traj.steps = t;
    }

    if let Some(tr) = trace {
        tr.eta.push((0..d).map(|j| rule.next(j)).collect());
    }

    let (x_last, gap_last, gns_last) = last.expect("horizon is at least 1");
    let avg: Vec<f64> = sum_x.iter().map(|s| s / horizon as f64).collect();
    let mut avg_grad = vec![0.0; d];
    let avg_gap = objective.value_and_grad(&avg, &mut avg_grad) - f_star;
    let avg_gns = vector::norm_sq(&avg_grad);
    let best_gap = objective.value_unchecked(&best_x) - f_star;
    let to_vector = |v: Vec<f64>| Vector::new(v).map_err(RunFailure::from);
    traj.selections = Some(Selections {
        last: Selection {
            which: Selector::Last,
            t: Some(horizon),
            x: to_vector(x_last)?,
            f_gap: gap_last,
            grad_norm_sq: gns_last,
        },
        average: Selection {
            which: Selector::Average,
            t: None,
            x: to_vector(avg)?,
            f_gap: avg_gap,
            grad_norm_sq: avg_gns,
        },
        best_gradient: Selection {
            which: Selector::BestGradient,
            t: Some(best.0),
            x: to_vector(best_x)?,
            f_gap: best_gap,
            grad_norm_sq: best.1,
        },
    });
    traj.checkpoints = checkpoints;
    traj.snapshots = snapshots;
    traj.sums = sums;
    traj.initial_f_gap = initial_f_gap;
    traj.next_iterate = Some(x);
    Ok(traj)
}

fn fail(
    mut traj: Trajectory,
    t: u64,
    detail: String,
    checkpoints: Vec<Checkpoint>,
    snapshots: Vec<HorizonSnapshot>,
    sums: RunSums,
    initial_f_gap: f64,
) -> RunFailure {
    traj.checkpoints = checkpoints;
    traj.snapshots = snapshots;
    traj.sums = sums;
    traj.initial_f_gap = initial_f_gap;
    traj.failed_at = Some(t);
    RunFailure {
        error: Error::Numerical { t, detail },
        partial: Some(Box::new(traj)),
    }
}
