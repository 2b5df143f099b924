//! Command-line front end for adaptive-stepsize SGD experiments.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical
//! failure, 3 lemma violation.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use adastep::parallel::Execution;
use clap::{Parser, Subcommand};

use crate::commands::{Example1Args, LemmaArgs};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "ADASTEP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "adastep", version, about = "Adaptive-stepsize SGD experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one seed and write its trajectory.
    Run {
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run every (sigma, seed) cell of the config grid and fit rates.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check the auxiliary inequalities on random instances.
    Lemmas {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Instances per lemma.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_wrong_rhs: Option<String>,
    },
    /// One biased AdaGrad step on x²/2 under three-point noise.
    Example1 {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 10.0)]
        sigma: f64,
        #[arg(long, default_value_t = 10.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-fit rates from the horizons.csv of a finished sweep.
    Rates {
        dir: PathBuf,
        /// Metric to fit; defaults to the one recorded in manifest.json.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

/// Worker count: the environment wins over the config.
pub fn resolve_workers(configured: Option<usize>) -> CliResult<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("invalid configuration `{WORKERS_ENV}`: expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(configured),
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> CliResult<R>
where
    R: Send,
    F: FnOnce(Execution) -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match workers {
            Some(1) => Ok(f(Execution::Sequential)),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Config(format!("invalid configuration `workers`: {e}")))?;
                Ok(pool.install(|| f(Execution::Parallel)))
            }
            None => Ok(f(Execution::Parallel)),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        Ok(f(Execution::Sequential))
    }
}

fn load(path: &std::path::Path, output_dir: Option<PathBuf>) -> CliResult<(ExperimentConfig, PathBuf)> {
    let config = ExperimentConfig::load(path)?;
    let dir = output_dir.unwrap_or_else(|| config.output_dir.clone());
    Ok((config, dir))
}

pub fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Run { config, output_dir } => {
            let (config, dir) = load(&config, output_dir)?;
            commands::cmd_run(&config, &dir)
        }
        Command::Sweep { config, output_dir } => {
            let (config, dir) = load(&config, output_dir)?;
            let workers = resolve_workers(config.workers)?;
            with_workers(workers, |exec| commands::cmd_sweep(&config, &dir, exec))?
        }
        Command::Lemmas {
            seed,
            n,
            output_dir,
            inject_wrong_rhs,
        } => {
            let args = LemmaArgs {
                seed,
                n,
                output_dir,
                inject_wrong_rhs,
            };
            let workers = resolve_workers(None)?;
            with_workers(workers, |exec| commands::cmd_lemmas(&args, exec))?
        }
        Command::Example1 {
            x,
            sigma,
            a,
            alpha,
            epsilon,
            n,
            seed,
        } => commands::cmd_example1(&Example1Args {
            x,
            sigma,
            a,
            alpha,
            epsilon,
            n,
            seed,
        }),
        Command::Rates { dir, metric, output_dir } => {
            commands::cmd_rates(&dir, metric.as_deref(), output_dir.as_deref())
        }
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_from_env() -> i32 {
    run_with_args(std::env::args_os())
}
