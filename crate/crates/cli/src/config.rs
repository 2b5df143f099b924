//! Strict JSON experiment configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use adastep::oracle::NoiseModel;
use adastep::problems::{make_logistic, make_quadratic, make_smooth_nonconvex, Objective};
use adastep::stepsize::StepsizeConfig;
use adastep::Vector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic {
        dim: usize,
        eigenvalues: Vec<f64>,
        /// Minimizer; the origin when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_star: Option<Vec<f64>>,
        #[serde(default)]
        rotation_seed: u64,
    },
    Logistic {
        dim: usize,
        n_samples: usize,
        #[serde(default)]
        data_seed: u64,
    },
    SmoothNonconvex {
        dim: usize,
    },
}

impl ObjectiveSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ObjectiveSpec::Quadratic { dim, .. }
            | ObjectiveSpec::Logistic { dim, .. }
            | ObjectiveSpec::SmoothNonconvex { dim } => dim,
        }
    }

    pub fn build(&self) -> adastep::Result<Arc<Objective>> {
        let obj = match self {
            ObjectiveSpec::Quadratic {
                dim,
                eigenvalues,
                x_star,
                rotation_seed,
            } => {
                let center = match x_star {
                    Some(v) => Vector::new(v.clone())?,
                    None => Vector::zeros((*dim).max(1)),
                };
                make_quadratic(*dim, eigenvalues, &center, *rotation_seed)?
            }
            ObjectiveSpec::Logistic {
                dim,
                n_samples,
                data_seed,
            } => make_logistic(*dim, *n_samples, *data_seed)?,
            ObjectiveSpec::SmoothNonconvex { dim } => make_smooth_nonconvex(*dim)?,
        };
        Ok(Arc::new(obj))
    }
}

/// Starting point: explicit coordinates or one value for every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Point(Vec<f64>),
    Fill(f64),
}

impl StartSpec {
    pub fn build(&self, dim: usize) -> adastep::Result<Vector> {
        match self {
            StartSpec::Point(v) => Vector::new(v.clone()),
            StartSpec::Fill(v) => Vector::filled(dim, *v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Noise magnitudes; each one rescales the configured noise family.
    pub sigmas: Vec<f64>,
    /// Explicit seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Seeds `0..n_seeds`, when no explicit list is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_seeds: Option<u64>,
    /// Prefix lengths at which metrics are snapshotted and rates fitted.
    pub horizons: Vec<u64>,
}

impl GridSpec {
    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.n_seeds) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) => (0..n).collect(),
            (None, None) => Vec::new(),
        }
    }
}

fn default_stride() -> u64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub noise: NoiseModel,
    pub stepsize: StepsizeConfig,
    pub x0: StartSpec,
    pub horizon: u64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    /// Seed of a single `run`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid configuration `{key}`: {msg}"))
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "<root>".to_string() } else { path };
            config_err(&key, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact serialization of the parsed config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> CliResult<()> {
        let objective = self.objective.build()?;
        let dim = objective.dim();
        self.noise.validate(dim)?;
        self.stepsize.validate()?;
        if self.stepsize.is_biased() {
            return Err(config_err(
                "stepsize.variant",
                "biased_global_adagrad cannot drive experiments; see the example1 command",
            ));
        }
        let x0 = self.x0.build(dim)?;
        if x0.dim() != dim {
            return Err(config_err("x0", format!("expected dimension {dim}, got {}", x0.dim())));
        }
        if self.horizon == 0 {
            return Err(config_err("horizon", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(config_err("record_stride", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(config_err("workers", "must be at least 1"));
        }
        if let Some(grid) = &self.grid {
            if grid.sigmas.is_empty() {
                return Err(config_err("grid.sigmas", "must not be empty"));
            }
            if let Some(s) = grid.sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                return Err(config_err("grid.sigmas", format!("must be finite and non-negative, got {s}")));
            }
            let mut sorted = grid.sigmas.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(config_err("grid.sigmas", "must be distinct"));
            }
            match (&grid.seeds, grid.n_seeds) {
                (Some(_), Some(_)) => return Err(config_err("grid.seeds", "give either seeds or n_seeds, not both")),
                (None, None) => return Err(config_err("grid.seeds", "one of seeds or n_seeds is required")),
                _ => {}
            }
            let mut seeds = grid.seed_list();
            if seeds.is_empty() {
                return Err(config_err("grid.seeds", "must not be empty"));
            }
            seeds.sort_unstable();
            if seeds.windows(2).any(|w| w[0] == w[1]) {
                return Err(config_err("grid.seeds", "must be distinct"));
            }
            if grid.horizons.is_empty() {
                return Err(config_err("grid.horizons", "must not be empty"));
            }
            if grid.horizons.windows(2).any(|w| w[0] >= w[1]) {
                return Err(config_err("grid.horizons", "must be strictly increasing"));
            }
            if grid.horizons[0] == 0 {
                return Err(config_err("grid.horizons", "must be at least 1"));
            }
            if *grid.horizons.last().expect("non-empty") > self.horizon {
                return Err(config_err("grid.horizons", "must not exceed horizon"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<&GridSpec> {
        self.grid
            .as_ref()
            .ok_or_else(|| config_err("grid", "the sweep command needs a grid"))
    }
}
