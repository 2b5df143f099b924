//! Noise-level × seed sweeps with a deterministic merge.

use std::cmp::Ordering;

use adastep::analysis::{bound_report_from_samples, fit_rate, BoundEvaluation, BoundReport, BoundSetup};
use adastep::optimizer::{self, RunConfig, Selector, Trajectory};
use adastep::oracle::{GradientOracle, NoiseModel};
use adastep::parallel::{self, Execution};
use adastep::stepsize::StepsizeConfig;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::fmt_float;

/// Fraction of cells that must finish for a sweep to succeed.
pub const SUCCESS_FRACTION: f64 = 0.9;

pub const CELL_HEADER: [&str; 12] = [
    "sigma",
    "seed",
    "status",
    "failed_at",
    "steps",
    "t_last",
    "f_gap",
    "grad_norm_sq",
    "f_gap_avg",
    "best_grad_norm_sq",
    "liminf_stat",
    "error",
];

pub const HORIZON_HEADER: [&str; 8] = [
    "sigma",
    "seed",
    "t",
    "f_gap_avg",
    "f_gap_last",
    "best_grad_norm_sq",
    "mean_f_gap",
    "mean_grad_norm_sq",
];

pub const RATE_HEADER: [&str; 5] = ["sigma", "metric", "slope", "r_squared", "n_seeds"];

/// Metrics fitted alongside the primary one, written to `rates_diagnostic.csv`.
pub const DIAGNOSTIC_METRICS: [&str; 5] = [
    "f_gap_avg",
    "f_gap_last",
    "best_grad_norm_sq",
    "mean_f_gap",
    "mean_grad_norm_sq",
];

/// The metric whose rate the theory speaks about for this objective.
pub fn primary_metric(convex: bool) -> &'static str {
    if convex {
        "f_gap_avg"
    } else {
        "best_grad_norm_sq"
    }
}

/// Noise of the configured family at magnitude `sigma`.
pub fn noise_at(family: NoiseModel, sigma: f64) -> NoiseModel {
    family.with_magnitude(sigma)
}

/// Outcome of one `(sigma, seed)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub sigma: f64,
    pub seed: u64,
    pub failed_at: Option<u64>,
    pub steps: u64,
    /// Last finite checkpoint.
    pub t_last: Option<u64>,
    pub f_gap: Option<f64>,
    pub grad_norm_sq: Option<f64>,
    pub f_gap_avg: Option<f64>,
    pub best_grad_norm_sq: Option<f64>,
    pub liminf_stat: Option<f64>,
    pub error: Option<String>,
    /// Sample fed to the theorem bound.
    pub bound_sample: Option<f64>,
}

impl CellRow {
    pub fn succeeded(&self) -> bool {
        self.failed_at.is_none() && self.error.is_none()
    }

    pub fn to_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        vec![
            fmt_float(self.sigma),
            self.seed.to_string(),
            if self.succeeded() { "ok" } else { "failed" }.to_string(),
            self.failed_at.map(|t| t.to_string()).unwrap_or_default(),
            self.steps.to_string(),
            self.t_last.map(|t| t.to_string()).unwrap_or_default(),
            opt(self.f_gap),
            opt(self.grad_norm_sq),
            opt(self.f_gap_avg),
            opt(self.best_grad_norm_sq),
            opt(self.liminf_stat),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub sigma: f64,
    pub seed: u64,
    pub t: u64,
    pub f_gap_avg: f64,
    pub f_gap_last: f64,
    pub best_grad_norm_sq: f64,
    pub mean_f_gap: f64,
    pub mean_grad_norm_sq: f64,
}

impl HorizonRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "f_gap_avg" => self.f_gap_avg,
            "f_gap_last" => self.f_gap_last,
            "best_grad_norm_sq" => self.best_grad_norm_sq,
            "mean_f_gap" => self.mean_f_gap,
            "mean_grad_norm_sq" => self.mean_grad_norm_sq,
            _ => return None,
        })
    }

    pub fn to_record(&self) -> Vec<String> {
        vec![
            fmt_float(self.sigma),
            self.seed.to_string(),
            self.t.to_string(),
            fmt_float(self.f_gap_avg),
            fmt_float(self.f_gap_last),
            fmt_float(self.best_grad_norm_sq),
            fmt_float(self.mean_f_gap),
            fmt_float(self.mean_grad_norm_sq),
        ]
    }
}

/// One fitted rate; a failed fit keeps NaN slope and r².
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub sigma: f64,
    pub metric: String,
    pub slope: f64,
    pub r_squared: f64,
    pub n_seeds: usize,
}

impl RateRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            fmt_float(self.sigma),
            self.metric.clone(),
            fmt_float(self.slope),
            fmt_float(self.r_squared),
            self.n_seeds.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub sigma: f64,
    pub n_runs: usize,
    pub evaluation: Option<BoundEvaluation>,
    pub report: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub primary_metric: &'static str,
    pub cells: Vec<CellRow>,
    pub horizons: Vec<HorizonRow>,
    pub rates: Vec<RateRow>,
    pub diagnostics: Vec<RateRow>,
    pub bounds: Vec<BoundEntry>,
}

impl SweepOutcome {
    pub fn succeeded(&self) -> usize {
        self.cells.iter().filter(|c| c.succeeded()).count()
    }

    pub fn acceptable(&self) -> bool {
        self.succeeded() as f64 >= SUCCESS_FRACTION * self.cells.len() as f64
    }
}

fn by_sigma_seed(a: (f64, u64), b: (f64, u64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn cell_from_trajectory(sigma: f64, seed: u64, traj: &Trajectory, convex: bool) -> CellRow {
    let last = traj.final_checkpoint();
    let sel = |s: Selector| traj.select(s).ok();
    let bound_sample = if convex {
        sel(Selector::Average).map(|s| s.f_gap)
    } else {
        sel(Selector::BestGradient).map(|s| s.grad_norm_sq)
    };
    CellRow {
        sigma,
        seed,
        failed_at: traj.failed_at,
        steps: traj.steps,
        t_last: last.map(|c| c.t),
        f_gap: last.map(|c| c.f_gap),
        grad_norm_sq: last.map(|c| c.grad_norm_sq),
        f_gap_avg: sel(Selector::Average).map(|s| s.f_gap),
        best_grad_norm_sq: sel(Selector::BestGradient).map(|s| s.grad_norm_sq),
        liminf_stat: last.map(|c| c.liminf_stat),
        error: None,
        bound_sample,
    }
}

fn failed_cell(sigma: f64, seed: u64, failure: optimizer::RunFailure, convex: bool) -> CellRow {
    let mut row = match failure.partial.as_deref() {
        Some(p) => cell_from_trajectory(sigma, seed, p, convex),
        None => CellRow {
            sigma,
            seed,
            failed_at: None,
            steps: 0,
            t_last: None,
            f_gap: None,
            grad_norm_sq: None,
            f_gap_avg: None,
            best_grad_norm_sq: None,
            liminf_stat: None,
            error: None,
            bound_sample: None,
        },
    };
    row.error = Some(failure.error.to_string());
    row.f_gap_avg = None;
    row.best_grad_norm_sq = None;
    row.bound_sample = None;
    row
}

/// Runs every cell of the grid. Cells are merged in `(sigma, seed)` order,
/// so the result does not depend on the execution strategy or on the order
/// in which the grid lists its seeds.
pub fn run_sweep(config: &ExperimentConfig, execution: Execution) -> CliResult<SweepOutcome> {
    let grid = config.grid()?;
    let objective = config.objective.build()?;
    let x0 = config.x0.build(objective.dim())?;
    let convex = objective.is_convex();

    let mut cells: Vec<(f64, u64)> = grid
        .sigmas
        .iter()
        .flat_map(|&s| grid.seed_list().into_iter().map(move |seed| (s, seed)))
        .collect();
    cells.sort_by(|a, b| by_sigma_seed(*a, *b));
    cells.dedup();

    let results = parallel::map_ordered(&cells, execution, |&(sigma, seed)| {
        let oracle = GradientOracle::new(objective.clone(), noise_at(config.noise, sigma))?;
        let run = RunConfig::new(oracle, config.stepsize, x0.clone(), config.horizon, seed)
            .with_record_stride(config.horizon)
            .with_horizons(grid.horizons.clone());
        Ok::<_, CliError>(match optimizer::run(&run) {
            Ok(traj) => {
                let horizons = traj
                    .snapshots
                    .iter()
                    .map(|s| HorizonRow {
                        sigma,
                        seed,
                        t: s.t,
                        f_gap_avg: s.f_gap_avg,
                        f_gap_last: s.f_gap_last,
                        best_grad_norm_sq: s.best_grad_norm_sq,
                        mean_f_gap: s.mean_f_gap,
                        mean_grad_norm_sq: s.mean_grad_norm_sq,
                    })
                    .collect();
                (cell_from_trajectory(sigma, seed, &traj, convex), horizons)
            }
            Err(failure) => (failed_cell(sigma, seed, failure, convex), Vec::new()),
        })
    });

    let mut rows = Vec::with_capacity(results.len());
    let mut horizons = Vec::new();
    for r in results {
        let (cell, h) = r?;
        rows.push(cell);
        horizons.extend(h);
    }

    let primary = primary_metric(convex);
    let (rates, diagnostics) = aggregate_rates(&horizons, primary);
    let bounds = bound_entries(config, &rows, execution)?;
    Ok(SweepOutcome {
        primary_metric: primary,
        cells: rows,
        horizons,
        rates,
        diagnostics,
        bounds,
    })
}

fn fit_row(sigma: f64, metric: &str, rows: &[&HorizonRow]) -> RateRow {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut ts: Vec<u64> = rows.iter().map(|r| r.t).collect();
    ts.sort_unstable();
    ts.dedup();
    let points: Vec<(u64, f64)> = ts
        .iter()
        .map(|&t| {
            let mut at: Vec<&&HorizonRow> = rows.iter().filter(|r| r.t == t).collect();
            at.sort_by_key(|r| r.seed);
            let sum: f64 = at.iter().map(|r| r.metric(metric).unwrap_or(f64::NAN)).sum();
            (t, sum / at.len() as f64)
        })
        .collect();
    let (slope, r_squared) = match fit_rate(metric, &points) {
        Ok(fit) => (fit.slope, fit.r_squared),
        Err(_) => (f64::NAN, f64::NAN),
    };
    RateRow {
        sigma,
        metric: metric.to_string(),
        slope,
        r_squared,
        n_seeds: seeds.len(),
    }
}

/// Fits seed-averaged metrics against the horizon, per noise level.
///
/// Returns one primary row per sigma and the diagnostic rows.
pub fn aggregate_rates(rows: &[HorizonRow], primary: &str) -> (Vec<RateRow>, Vec<RateRow>) {
    let mut sigmas: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut rates = Vec::new();
    let mut diagnostics = Vec::new();
    for sigma in sigmas {
        let at: Vec<&HorizonRow> = rows.iter().filter(|r| r.sigma.to_bits() == sigma.to_bits()).collect();
        rates.push(fit_row(sigma, primary, &at));
        for metric in DIAGNOSTIC_METRICS {
            diagnostics.push(fit_row(sigma, metric, &at));
        }
    }
    (rates, diagnostics)
}

fn bound_entries(config: &ExperimentConfig, cells: &[CellRow], execution: Execution) -> CliResult<Vec<BoundEntry>> {
    let grid = config.grid()?;
    let mut sigmas = grid.sigmas.clone();
    sigmas.sort_by(f64::total_cmp);
    let objective = config.objective.build()?;
    let x0 = config.x0.build(objective.dim())?;
    let mut out = Vec::new();
    for sigma in sigmas {
        let samples: Vec<f64> = cells
            .iter()
            .filter(|c| c.sigma.to_bits() == sigma.to_bits())
            .filter_map(|c| c.bound_sample)
            .collect();
        let mut entry = BoundEntry {
            sigma,
            n_runs: samples.len(),
            evaluation: None,
            report: None,
            note: None,
        };
        if !matches!(config.stepsize, StepsizeConfig::GlobalAdagrad { .. }) {
            entry.note = Some("theorem bounds are stated for global_adagrad".into());
            out.push(entry);
            continue;
        }
        let setup = BoundSetup {
            objective: objective.clone(),
            noise: noise_at(config.noise, sigma),
            stepsize: config.stepsize,
            x0: x0.clone(),
            horizon: config.horizon,
            seeds: Vec::new(),
            execution,
        };
        match setup.evaluate() {
            Ok(eval) => {
                if let Some(reason) = &eval.invalid_regime {
                    entry.note = Some(reason.clone());
                } else if samples.is_empty() {
                    entry.note = Some("no successful runs".into());
                } else {
                    entry.report = Some(bound_report_from_samples(&eval, &samples)?);
                    if samples.len() < adastep::analysis::bounds::MIN_RUNS {
                        entry.note = Some(format!(
                            "indicative only: {} runs, {} recommended",
                            samples.len(),
                            adastep::analysis::bounds::MIN_RUNS
                        ));
                    }
                }
                entry.evaluation = Some(eval);
            }
            Err(e) => entry.note = Some(e.to_string()),
        }
        out.push(entry);
    }
    Ok(out)
}
