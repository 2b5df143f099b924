//! Subcommand implementations. Each returns the process exit code or an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use adastep::analysis::lemmas::{Lemma, LemmaCheck};
use adastep::analysis::{example1_exact, unbiased_direction_check};
use adastep::optimizer::{self, biased, checkpoint_grid, RunConfig, Trajectory};
use adastep::oracle::GradientOracle;
use adastep::parallel::Execution;
use adastep::rng::SimRng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, fmt_float, write_csv, write_json, write_trajectory_csv};
use crate::sweep::{self, HorizonRow, CELL_HEADER, HORIZON_HEADER, RATE_HEADER};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a ExperimentConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    primary_metric: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_grid_size: Option<usize>,
    /// Data rows per written file.
    files: BTreeMap<&'static str, usize>,
    wall_time_seconds: f64,
}

impl<'a> Manifest<'a> {
    fn new(command: &'static str) -> Self {
        Manifest {
            tool: "adastep",
            version: VERSION,
            command,
            config_hash: None,
            config: None,
            primary_metric: None,
            grid_size: None,
            checkpoint_grid_size: None,
            files: BTreeMap::new(),
            wall_time_seconds: 0.0,
        }
    }

    fn with_config(mut self, config: &'a ExperimentConfig) -> Self {
        self.config_hash = Some(config.hash());
        self.config = Some(config);
        self
    }
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    info: &'a optimizer::RunInfo,
    complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_at: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    steps: u64,
    initial_f_gap: f64,
    liminf_exponent: f64,
    sums: &'a optimizer::RunSums,
    selections: Option<&'a optimizer::Selections>,
    snapshots: &'a [optimizer::HorizonSnapshot],
    final_checkpoint: Option<&'a optimizer::Checkpoint>,
}

fn summary<'a>(traj: &'a Trajectory, error: Option<String>) -> RunSummary<'a> {
    RunSummary {
        info: &traj.info,
        complete: traj.is_complete(),
        failed_at: traj.failed_at,
        error,
        steps: traj.steps,
        initial_f_gap: traj.initial_f_gap,
        liminf_exponent: traj.liminf_exponent,
        sums: &traj.sums,
        selections: traj.selections(),
        snapshots: &traj.snapshots,
        final_checkpoint: traj.final_checkpoint(),
    }
}

/// Single run: `trajectory.csv`, `summary.json`, `manifest.json`.
pub fn cmd_run(config: &ExperimentConfig, out_dir: &Path) -> CliResult<i32> {
    let start = Instant::now();
    let objective = config.objective.build()?;
    let x0 = config.x0.build(objective.dim())?;
    let oracle = GradientOracle::new(objective, config.noise)?;
    let horizons = config.grid.as_ref().map(|g| g.horizons.clone()).unwrap_or_default();
    let run = RunConfig::new(oracle, config.stepsize, x0, config.horizon, config.seed)
        .with_record_stride(config.record_stride)
        .with_horizons(horizons.clone());
    run.validate()?;

    let (traj, failure) = match optimizer::run(&run) {
        Ok(t) => (t, None),
        Err(f) => match f.partial {
            Some(p) => (*p, Some(f.error)),
            None => return Err(f.error.into()),
        },
    };

    ensure_dir(out_dir)?;
    let mut manifest = Manifest::new("run").with_config(config);
    manifest.checkpoint_grid_size = Some(checkpoint_grid(config.horizon, config.record_stride, &horizons).len());
    let rows = write_trajectory_csv(&out_dir.join("trajectory.csv"), &traj)?;
    manifest.files.insert("trajectory.csv", rows);
    write_json(&out_dir.join("summary.json"), &summary(&traj, failure.as_ref().map(|e| e.to_string())))?;
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    match failure {
        None => Ok(0),
        Some(e) => Err(e.into()),
    }
}

/// Grid sweep over noise levels and seeds.
pub fn cmd_sweep(config: &ExperimentConfig, out_dir: &Path, execution: Execution) -> CliResult<i32> {
    let start = Instant::now();
    let outcome = sweep::run_sweep(config, execution)?;
    ensure_dir(out_dir)?;
    let mut manifest = Manifest::new("sweep").with_config(config);
    manifest.primary_metric = Some(outcome.primary_metric);
    manifest.grid_size = Some(outcome.cells.len());
    let n = write_csv(&out_dir.join("cells.csv"), &CELL_HEADER, outcome.cells.iter().map(|c| c.to_record()))?;
    manifest.files.insert("cells.csv", n);
    let n = write_csv(&out_dir.join("horizons.csv"), &HORIZON_HEADER, outcome.horizons.iter().map(HorizonRow::to_record))?;
    manifest.files.insert("horizons.csv", n);
    let n = write_csv(&out_dir.join("rates.csv"), &RATE_HEADER, outcome.rates.iter().map(|r| r.to_record()))?;
    manifest.files.insert("rates.csv", n);
    let n = write_csv(
        &out_dir.join("rates_diagnostic.csv"),
        &RATE_HEADER,
        outcome.diagnostics.iter().map(|r| r.to_record()),
    )?;
    manifest.files.insert("rates_diagnostic.csv", n);
    write_json(&out_dir.join("bounds.json"), &outcome.bounds)?;
    manifest.files.insert("bounds.json", outcome.bounds.len());
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    write_json(&out_dir.join("manifest.json"), &manifest)?;

    let ok = outcome.succeeded();
    let total = outcome.cells.len();
    eprintln!("sweep: {ok}/{total} cells succeeded; results in {}", out_dir.display());
    if outcome.acceptable() {
        Ok(0)
    } else {
        Err(CliError::Numerical(format!(
            "numerical failure: only {ok} of {total} cells succeeded (need {:.0}%)",
            sweep::SUCCESS_FRACTION * 100.0
        )))
    }
}

/// Re-fits rates from an existing `horizons.csv`.
pub fn cmd_rates(dir: &Path, metric: Option<&str>, out_dir: Option<&Path>) -> CliResult<i32> {
    let primary = match metric {
        Some(m) => m.to_string(),
        None => {
            let path = dir.join("manifest.json");
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid file {}: {e}", path.display())))?;
            v.get("primary_metric")
                .and_then(|m| m.as_str())
                .ok_or_else(|| CliError::Config("invalid configuration `primary_metric`: missing from manifest; pass --metric".into()))?
                .to_string()
        }
    };
    if !sweep::DIAGNOSTIC_METRICS.contains(&primary.as_str()) {
        return Err(CliError::Config(format!(
            "invalid configuration `metric`: unknown metric {primary:?}; expected one of {}",
            sweep::DIAGNOSTIC_METRICS.join(", ")
        )));
    }
    let path = dir.join("horizons.csv");
    let io = |e: csv::Error| CliError::Config(format!("invalid file {}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(&path).map_err(io)?;
    let rows: Vec<HorizonRow> = reader.deserialize().collect::<Result<_, _>>().map_err(io)?;
    let (rates, diagnostics) = sweep::aggregate_rates(&rows, &primary);
    let out = out_dir.unwrap_or(dir);
    ensure_dir(out)?;
    write_csv(&out.join("rates.csv"), &RATE_HEADER, rates.iter().map(|r| r.to_record()))?;
    write_csv(&out.join("rates_diagnostic.csv"), &RATE_HEADER, diagnostics.iter().map(|r| r.to_record()))?;
    for r in &rates {
        println!("sigma={} metric={} slope={} r_squared={} n_seeds={}", r.sigma, r.metric, r.slope, r.r_squared, r.n_seeds);
    }
    Ok(0)
}

pub struct LemmaArgs {
    pub seed: u64,
    pub n: usize,
    pub output_dir: Option<PathBuf>,
    pub inject_wrong_rhs: Option<String>,
}

pub fn cmd_lemmas(args: &LemmaArgs, execution: Execution) -> CliResult<i32> {
    let inject = match &args.inject_wrong_rhs {
        Some(name) => Some(Lemma::from_name(name).ok_or_else(|| {
            let names: Vec<_> = Lemma::ALL.iter().map(|l| l.name()).collect();
            CliError::Config(format!("invalid configuration `inject-wrong-rhs`: unknown lemma {name:?}; expected one of {}", names.join(", ")))
        })?),
        None => None,
    };
    let check = LemmaCheck {
        seed: args.seed,
        n_instances: args.n,
        execution,
        inject_wrong_rhs: inject,
    };
    let report = check.run()?;
    let text = report.to_text();
    print!("{text}");
    if let Some(dir) = &args.output_dir {
        ensure_dir(dir)?;
        std::fs::write(dir.join("lemmas.txt"), &text).map_err(|e| CliError::io(dir.join("lemmas.txt"), e))?;
        write_json(&dir.join("lemmas.json"), &report)?;
    }
    if report.passed() {
        Ok(0)
    } else {
        let first = report
            .results
            .iter()
            .find_map(|r| r.counterexample.as_ref().map(|c| (r.lemma, c)));
        let detail = match first {
            Some((lemma, c)) => format!(
                "{} violation(s); first in {}: lhs={} rhs={} params={}",
                report.violations(),
                lemma.name(),
                fmt_float(c.lhs),
                fmt_float(c.rhs),
                serde_json::to_string(&c.params).unwrap_or_default()
            ),
            None => format!("{} violation(s)", report.violations()),
        };
        Err(CliError::LemmaViolation(detail))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Example1Args {
    pub x: f64,
    pub sigma: f64,
    pub a: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub n: u64,
    pub seed: u64,
}

pub fn example1_text(args: &Example1Args) -> CliResult<String> {
    let Example1Args { x, sigma, a, alpha, epsilon, n, seed } = *args;
    let exact = example1_exact(x, sigma, a, alpha, epsilon)?;
    let mut rng = SimRng::new(seed, 0);
    let mc = biased::run_biased_step(x, sigma, a, alpha, epsilon, &mut rng, n)?;
    let unbiased = unbiased_direction_check(x, sigma, a, alpha, epsilon)?;
    let agree = mc.agrees_with(exact, 3.0);
    let mut s = String::new();
    let _ = writeln!(s, "x={x} sigma={sigma} a={a} alpha={alpha} epsilon={epsilon}");
    let _ = writeln!(s, "exact        {}", fmt_float(exact));
    let _ = writeln!(
        s,
        "monte_carlo  {} se {} n={} within_3se={}",
        fmt_float(mc.mean),
        fmt_float(mc.se),
        mc.n,
        if agree { "yes" } else { "no" }
    );
    let _ = writeln!(s, "unbiased     {}", fmt_float(unbiased));
    Ok(s)
}

pub fn cmd_example1(args: &Example1Args) -> CliResult<i32> {
    print!("{}", example1_text(args)?);
    Ok(0)
}
