//! Seed-averaged checks of the per-run descent inequalities, and the
//! long-run trend of the liminf statistic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::{self, RunConfig, Trajectory};
use crate::oracle::{GradientOracle, NoiseModel};
use crate::parallel::{self, Execution};
use crate::stats::MeanEstimate;
use crate::stepsize::StepsizeConfig;
use crate::vector::Vector;

use super::bounds::SE_SLACK;

/// Minimum number of runs behind a Monte Carlo inequality check.
pub const MIN_RUNS: usize = 200;

/// A batch of independent runs sharing everything but the seed.
#[derive(Debug, Clone)]
pub struct RunBatch {
    pub oracle: GradientOracle,
    pub stepsize: StepsizeConfig,
    pub x0: Vector,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub execution: Execution,
}

impl RunBatch {
    /// Runs every distinct seed; results come back in ascending seed order.
    pub fn run(&self) -> Result<Vec<Trajectory>> {
        let results = parallel::map_seeds(&self.seeds, self.execution, |seed| {
            let cfg = RunConfig::new(self.oracle.clone(), self.stepsize, self.x0.clone(), self.horizon, seed)
                .with_record_stride(self.horizon);
            optimizer::run(&cfg).map_err(Error::from)
        });
        results.into_iter().map(|(_, r)| r).collect()
    }

    fn distinct_seeds(&self) -> usize {
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        s.len()
    }
}

/// `E[lhs] ≤ E[rhs]`, judged on the paired per-run difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: MeanEstimate,
    pub rhs: MeanEstimate,
    /// Per-run `lhs − rhs`.
    pub difference: MeanEstimate,
    /// `difference.mean ≤ 3·difference.se`.
    pub satisfied: bool,
}

impl InequalityReport {
    fn from_pairs(name: &str, pairs: &[(f64, f64)]) -> InequalityReport {
        let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        let difference = MeanEstimate::from_samples(&diff);
        InequalityReport {
            name: name.to_string(),
            lhs: MeanEstimate::from_samples(&lhs),
            rhs: MeanEstimate::from_samples(&rhs),
            difference,
            satisfied: difference.mean <= SE_SLACK * difference.se,
        }
    }
}

fn require_runs(batch: &RunBatch) -> Result<()> {
    let n = batch.distinct_seeds();
    if n < MIN_RUNS {
        return Err(Error::config(
            "n_runs",
            format!("need at least {MIN_RUNS} distinct seeds, got {n}"),
        ));
    }
    Ok(())
}

/// `E Σ_t ⟨∇f(x_t), η_t ∇f(x_t)⟩ ≤ f(x_1) − f* + (M/2) E Σ_t ‖η_t g_t‖²`.
pub fn descent_lemma_check(batch: &RunBatch) -> Result<InequalityReport> {
    require_runs(batch)?;
    let m = batch.oracle.objective().smoothness();
    let pairs: Vec<(f64, f64)> = batch
        .run()?
        .iter()
        .map(|t| (t.sums.descent, t.initial_f_gap + 0.5 * m * t.sums.step_sq))
        .collect();
    Ok(InequalityReport::from_pairs("descent_lemma", &pairs))
}

/// `E Σ_t η_t²‖g_t‖² ≤ α²/(2εβ^{2ε}) + (4α²/β^{1+2ε})(1+ln T)σ²
/// + (4α/β^{½+ε}) E Σ_t η_t ‖∇f(x_t)‖²`, for `ε > 0`.
///
/// For coordinate-wise stepsizes the inequality is applied per coordinate
/// and summed, which multiplies the first two terms by the dimension.
/// `σ` is the noise model's support radius.
pub fn bounded_sum_squares_check(batch: &RunBatch) -> Result<InequalityReport> {
    require_runs(batch)?;
    let (alpha, beta, epsilon) = match batch.stepsize {
        StepsizeConfig::GlobalAdagrad { alpha, beta, epsilon }
        | StepsizeConfig::CoordAdagrad { alpha, beta, epsilon } => (alpha, beta, epsilon),
        _ => {
            return Err(Error::config(
                "stepsize.variant",
                "the check applies to global_adagrad and coord_adagrad",
            ))
        }
    };
    if epsilon <= 0.0 {
        return Err(Error::config("stepsize.epsilon", "the check needs epsilon > 0"));
    }
    let sigma = batch.oracle.noise().support_radius().ok_or_else(|| {
        Error::config("noise.kind", "the check needs noise with bounded support")
    })?;
    let copies = if batch.stepsize.is_coordinate_wise() {
        batch.oracle.dim() as f64
    } else {
        1.0
    };
    let t = batch.horizon as f64;
    let constant = copies
        * (alpha * alpha / (2.0 * epsilon * beta.powf(2.0 * epsilon))
            + 4.0 * alpha * alpha / beta.powf(1.0 + 2.0 * epsilon) * (1.0 + t.ln()) * sigma * sigma);
    let slope = 4.0 * alpha / beta.powf(0.5 + epsilon);
    let pairs: Vec<(f64, f64)> = batch
        .run()?
        .iter()
        .map(|tr| (tr.sums.step_sq, constant + slope * tr.sums.descent))
        .collect();
    Ok(InequalityReport::from_pairs("bounded_sum_squares", &pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiminfTrend {
    pub final_t: u64,
    pub final_stat: f64,
    pub reference_t: u64,
    pub reference_stat: f64,
    /// `final_stat ≤ 0.1 · reference_stat`.
    pub decreasing: bool,
}

/// Compares the liminf statistic at the end of a run with its value at one
/// hundredth of the horizon.
///
/// The statistic is only meaningful under bounded noise, a Lipschitz
/// objective and, for AdaGrad, `ε > 0`; other runs are rejected.
pub fn liminf_trend(trajectory: &Trajectory) -> Result<LiminfTrend> {
    let info = &trajectory.info;
    if matches!(info.noise, NoiseModel::Gaussian { .. }) {
        return Err(Error::config("noise.kind", "the liminf trend needs bounded-support noise"));
    }
    if info.lipschitz.is_none() {
        return Err(Error::config("objective", "the liminf trend needs a Lipschitz objective"));
    }
    if info.stepsize.adagrad_params().is_some() && info.stepsize.epsilon() <= 0.0 {
        return Err(Error::config("stepsize.epsilon", "the liminf trend needs epsilon > 0"));
    }
    if !trajectory.is_complete() {
        return Err(Error::IncompleteRun {
            failed_at: trajectory.failed_at.unwrap_or(0),
        });
    }
    let final_cp = trajectory
        .final_checkpoint()
        .ok_or_else(|| Error::config("trajectory", "no checkpoints recorded"))?;
    let reference_t = (info.horizon / 100).max(1);
    let reference = trajectory
        .checkpoint_at(reference_t)
        .ok_or_else(|| Error::config("trajectory", format!("no checkpoint at t={reference_t}")))?;
    Ok(LiminfTrend {
        final_t: final_cp.t,
        final_stat: final_cp.liminf_stat,
        reference_t,
        reference_stat: reference.liminf_stat,
        decreasing: final_cp.t > reference_t && final_cp.liminf_stat <= 0.1 * reference.liminf_stat,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::problems::{make_quadratic, make_smooth_nonconvex};

    #[test]
    fn single_step_is_not_decreasing() {
        let obj = Arc::new(make_smooth_nonconvex(2).unwrap());
        let oracle = GradientOracle::new(obj.clone(), NoiseModel::None).unwrap();
        let stepsize = StepsizeConfig::GlobalAdagrad { alpha: 0.5, beta: 1.0, epsilon: 0.25 };
        let x0 = Vector::filled(2, 1.0).unwrap();
        let traj = optimizer::run(&RunConfig::new(oracle, stepsize, x0.clone(), 1, 0)).unwrap();
        let trend = liminf_trend(&traj).unwrap();
        assert_eq!(trend.final_stat, obj.grad(x0.as_slice()).unwrap().norm_sq());
        assert!(!trend.decreasing);
    }

    #[test]
    fn rejects_gaussian_noise_and_unbounded_objectives() {
        let stepsize = StepsizeConfig::GlobalAdagrad { alpha: 0.5, beta: 1.0, epsilon: 0.25 };
        let x0 = Vector::filled(2, 1.0).unwrap();
        let nc = Arc::new(make_smooth_nonconvex(2).unwrap());
        let gauss = GradientOracle::new(nc, NoiseModel::Gaussian { sigma: 0.1 }).unwrap();
        let traj = optimizer::run(&RunConfig::new(gauss, stepsize, x0.clone(), 10, 0)).unwrap();
        assert!(matches!(liminf_trend(&traj), Err(Error::Config { .. })));

        let quad = Arc::new(make_quadratic(2, &[1.0, 2.0], &Vector::zeros(2), 0).unwrap());
        let oracle = GradientOracle::new(quad, NoiseModel::None).unwrap();
        let traj = optimizer::run(&RunConfig::new(oracle, stepsize, x0, 10, 0)).unwrap();
        assert!(matches!(liminf_trend(&traj), Err(Error::Config { .. })));
    }

    #[test]
    fn too_few_runs_is_a_config_error() {
        let quad = Arc::new(make_quadratic(1, &[1.0], &Vector::zeros(1), 0).unwrap());
        let batch = RunBatch {
            oracle: GradientOracle::new(quad, NoiseModel::BoundedSphere { radius: 1.0 }).unwrap(),
            stepsize: StepsizeConfig::GlobalAdagrad { alpha: 0.1, beta: 1.0, epsilon: 0.1 },
            x0: Vector::filled(1, 1.0).unwrap(),
            horizon: 10,
            seeds: (0..10).collect(),
            execution: Execution::Sequential,
        };
        assert!(descent_lemma_check(&batch).is_err());
    }
}
