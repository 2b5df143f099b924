//! Stepsize policies.
//!
//! Generalized AdaGrad stepsizes, global
//!
//! ```text
//! η_t = α / (β + Σ_{i<t} ‖g_i‖²)^(½+ε)
//! ```
//!
//! and coordinate-wise (`η_{t,j}` with `g_{i,j}²` in the sum), plus the
//! deterministic schedule `c / t^p`.
//!
//! Reading and updating are separate calls: [`StepsizeState::current`] is a
//! pure function of the gradients already passed to
//! [`StepsizeState::observe`], so the stepsize used at step `t` can never see
//! `g_t`. The biased variant that does include `g_t` is not constructible
//! here; it lives in [`crate::optimizer::biased`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{self, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsizeConfig {
    GlobalAdagrad { alpha: f64, beta: f64, epsilon: f64 },
    CoordAdagrad { alpha: f64, beta: f64, epsilon: f64 },
    /// Includes the current gradient in its own stepsize. Only usable through
    /// the optimizer's quarantined biased path.
    BiasedGlobalAdagrad { alpha: f64, beta: f64, epsilon: f64 },
    /// `η_t = scale / t^power`.
    Poly { power: f64, scale: f64 },
}

impl StepsizeConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepsizeConfig::GlobalAdagrad { alpha, beta, epsilon }
            | StepsizeConfig::CoordAdagrad { alpha, beta, epsilon }
            | StepsizeConfig::BiasedGlobalAdagrad { alpha, beta, epsilon } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::config("stepsize.alpha", format!("must be > 0, got {alpha}")));
                }
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::config("stepsize.beta", format!("must be > 0, got {beta}")));
                }
                if !(0.0..=0.5).contains(&epsilon) {
                    return Err(Error::config(
                        "stepsize.epsilon",
                        format!("must lie in [0, 0.5], got {epsilon}"),
                    ));
                }
                Ok(())
            }
            StepsizeConfig::Poly { power, scale } => {
                if !(power >= 0.0 && power.is_finite()) {
                    return Err(Error::config("stepsize.power", format!("must be >= 0, got {power}")));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::config("stepsize.scale", format!("must be > 0, got {scale}")));
                }
                Ok(())
            }
        }
    }

    /// `(α, β, ε)` for the AdaGrad variants.
    pub fn adagrad_params(&self) -> Option<(f64, f64, f64)> {
        match *self {
            StepsizeConfig::GlobalAdagrad { alpha, beta, epsilon }
            | StepsizeConfig::CoordAdagrad { alpha, beta, epsilon }
            | StepsizeConfig::BiasedGlobalAdagrad { alpha, beta, epsilon } => {
                Some((alpha, beta, epsilon))
            }
            StepsizeConfig::Poly { .. } => None,
        }
    }

    /// `ε` for AdaGrad variants; 0 for deterministic schedules.
    pub fn epsilon(&self) -> f64 {
        self.adagrad_params().map_or(0.0, |(_, _, e)| e)
    }

    pub fn is_coordinate_wise(&self) -> bool {
        matches!(self, StepsizeConfig::CoordAdagrad { .. })
    }

    pub fn is_biased(&self) -> bool {
        matches!(self, StepsizeConfig::BiasedGlobalAdagrad { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepsizeConfig::GlobalAdagrad { .. } => "global_adagrad",
            StepsizeConfig::CoordAdagrad { .. } => "coord_adagrad",
            StepsizeConfig::BiasedGlobalAdagrad { .. } => "biased_global_adagrad",
            StepsizeConfig::Poly { .. } => "poly",
        }
    }
}

/// A stepsize read: one scalar for global policies, one value per
/// coordinate for coordinate-wise ones.
#[derive(Debug, Clone, PartialEq)]
pub enum Eta {
    Scalar(f64),
    PerCoordinate(Vector),
}

impl Eta {
    pub fn min(&self) -> f64 {
        match self {
            Eta::Scalar(v) => *v,
            Eta::PerCoordinate(v) => v.as_slice().iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Eta::Scalar(v) => *v,
            Eta::PerCoordinate(v) => v.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Accumulator {
    None,
    Scalar(f64),
    PerCoordinate(Vec<f64>),
}

/// Running state of a stepsize policy for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepsizeState {
    config: StepsizeConfig,
    accumulator: Accumulator,
    /// Index of the step the next read applies to; starts at 1.
    t: u64,
}

impl StepsizeState {
    /// Fresh state for `dim`-dimensional gradients.
    ///
    /// Rejects [`StepsizeConfig::BiasedGlobalAdagrad`].
    pub fn new(config: StepsizeConfig, dim: usize) -> Result<Self> {
        if config.is_biased() {
            return Err(Error::config(
                "stepsize.variant",
                "biased_global_adagrad is only available through the optimizer's biased path",
            ));
        }
        Self::new_unchecked(config, dim)
    }

    pub(crate) fn new_unchecked(config: StepsizeConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::config("dim", "must be at least 1"));
        }
        let accumulator = match config {
            StepsizeConfig::GlobalAdagrad { beta, .. }
            | StepsizeConfig::BiasedGlobalAdagrad { beta, .. } => Accumulator::Scalar(beta),
            StepsizeConfig::CoordAdagrad { beta, .. } => Accumulator::PerCoordinate(vec![beta; dim]),
            StepsizeConfig::Poly { .. } => Accumulator::None,
        };
        Ok(StepsizeState {
            config,
            accumulator,
            t: 1,
        })
    }

    pub fn config(&self) -> &StepsizeConfig {
        &self.config
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `β + Σ ‖g_i‖²` for global policies.
    pub fn accumulator(&self) -> Option<f64> {
        match self.accumulator {
            Accumulator::Scalar(a) => Some(a),
            _ => None,
        }
    }

    /// `β + Σ g_{i,j}²` per coordinate for coordinate-wise policies.
    pub fn coordinate_accumulators(&self) -> Option<&[f64]> {
        match &self.accumulator {
            Accumulator::PerCoordinate(a) => Some(a),
            _ => None,
        }
    }

    /// Stepsize for the step with index `t()`.
    pub fn current(&self) -> Eta {
        match &self.accumulator {
            Accumulator::PerCoordinate(acc) => Eta::PerCoordinate(
                Vector::new((0..acc.len()).map(|j| self.coordinate(j)).collect())
                    .expect("stepsizes are finite"),
            ),
            _ => Eta::Scalar(self.coordinate(0)),
        }
    }

    /// Stepsize applied to coordinate `j` at the current step.
    #[inline]
    pub fn coordinate(&self, j: usize) -> f64 {
        match (&self.accumulator, self.config) {
            (Accumulator::Scalar(a), cfg) => {
                let (alpha, _, eps) = cfg.adagrad_params().expect("adagrad accumulator");
                alpha / a.powf(0.5 + eps)
            }
            (Accumulator::PerCoordinate(acc), cfg) => {
                let (alpha, _, eps) = cfg.adagrad_params().expect("adagrad accumulator");
                alpha / acc[j].powf(0.5 + eps)
            }
            (Accumulator::None, StepsizeConfig::Poly { power, scale }) => {
                scale / (self.t as f64).powf(power)
            }
            (Accumulator::None, _) => unreachable!("only poly schedules have no accumulator"),
        }
    }

    /// Folds `g` into the accumulator and advances `t` by one.
    pub fn observe(&mut self, g: &[f64]) -> Result<()> {
        if !vector::all_finite(g) {
            return Err(Error::Numerical {
                t: self.t,
                detail: "non-finite stochastic gradient passed to the stepsize".into(),
            });
        }
        match &mut self.accumulator {
            Accumulator::None => {}
            Accumulator::Scalar(a) => *a += vector::norm_sq(g),
            Accumulator::PerCoordinate(acc) => {
                if acc.len() != g.len() {
                    return Err(Error::Dimension {
                        expected: acc.len(),
                        got: g.len(),
                    });
                }
                for (a, gj) in acc.iter_mut().zip(g) {
                    *a += gj * gj;
                }
            }
        }
        self.t += 1;
        Ok(())
    }
}

/// Where a schedule diagnostic reads its stepsizes from.
#[derive(Debug, Clone, Copy)]
pub enum ScheduleSource<'a> {
    /// `scale / t^power`.
    Poly { power: f64, scale: f64 },
    /// A recorded sequence `η_1, η_2, …`.
    Recorded(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// The second half of the horizon adds at least a quarter of the total.
    PowerLike,
    /// Still growing, but slowly (harmonic-like).
    LogLike,
    /// The second half adds less than 0.1% of the total.
    Saturating,
}

impl Growth {
    fn classify(full: f64, half: f64) -> Growth {
        if full <= 0.0 {
            return Growth::Saturating;
        }
        let share = (full - half) / full;
        if share >= 0.25 {
            Growth::PowerLike
        } else if share >= 1e-3 {
            Growth::LogLike
        } else {
            Growth::Saturating
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleDiagnostic {
    pub horizon: u64,
    pub sum_eta: f64,
    pub sum_eta_sq: f64,
    pub sum_eta_half: f64,
    pub sum_eta_sq_half: f64,
    pub eta_growth: Growth,
    pub eta_sq_growth: Growth,
}

/// Partial sums `Σ η_t` and `Σ η_t²` up to `horizon`, and their growth
/// between the `horizon/2` and `horizon` prefixes.
///
/// Finite prefixes cannot certify divergence or summability; the growth
/// classes are descriptive only.
pub fn robbins_monro_diagnostic(source: ScheduleSource<'_>, horizon: u64) -> Result<ScheduleDiagnostic> {
    if horizon == 0 {
        return Err(Error::config("horizon", "must be at least 1"));
    }
    let eta = |t: u64| -> Result<f64> {
        match source {
            ScheduleSource::Poly { power, scale } => Ok(scale / (t as f64).powf(power)),
            ScheduleSource::Recorded(seq) => seq.get(t as usize - 1).copied().ok_or_else(|| {
                Error::config(
                    "horizon",
                    format!("recorded sequence has {} entries, horizon is {horizon}", seq.len()),
                )
            }),
        }
    };
    let half = horizon / 2;
    let (mut s1, mut s2) = (0.0, 0.0);
    let (mut h1, mut h2) = (0.0, 0.0);
    for t in 1..=horizon {
        let e = eta(t)?;
        s1 += e;
        s2 += e * e;
        if t == half {
            h1 = s1;
            h2 = s2;
        }
    }
    Ok(ScheduleDiagnostic {
        horizon,
        sum_eta: s1,
        sum_eta_sq: s2,
        sum_eta_half: h1,
        sum_eta_sq_half: h2,
        eta_growth: Growth::classify(s1, h1),
        eta_sq_growth: Growth::classify(s2, h2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global(alpha: f64, beta: f64, epsilon: f64) -> StepsizeConfig {
        StepsizeConfig::GlobalAdagrad { alpha, beta, epsilon }
    }

    #[test]
    fn first_global_stepsize_is_alpha_over_beta_power() {
        let s = StepsizeState::new(global(1.0, 4.0, 0.0), 2).unwrap();
        assert_eq!(s.current(), Eta::Scalar(0.5));
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn global_after_one_observation() {
        let mut s = StepsizeState::new(global(1.0, 4.0, 0.0), 2).unwrap();
        s.observe(&[2.0, 0.0]).unwrap();
        let Eta::Scalar(eta) = s.current() else { panic!() };
        assert!((eta - 0.3535533906).abs() < 1e-10);
        assert_eq!(eta, 1.0 / 8f64.sqrt());
    }

    #[test]
    fn coordinate_after_one_observation() {
        let cfg = StepsizeConfig::CoordAdagrad { alpha: 1.0, beta: 1.0, epsilon: 0.0 };
        let mut s = StepsizeState::new(cfg, 2).unwrap();
        s.observe(&[3.0, 4.0]).unwrap();
        let Eta::PerCoordinate(eta) = s.current() else { panic!() };
        assert_eq!(eta.as_slice(), &[1.0 / 10f64.sqrt(), 1.0 / 17f64.sqrt()]);
    }

    #[test]
    fn observe_accumulates_and_advances() {
        let mut s = StepsizeState::new(global(1.0, 0.5, 0.0), 1).unwrap();
        s.observe(&[0.0]).unwrap();
        assert_eq!(s.accumulator(), Some(0.5));
        assert_eq!(s.t(), 2);
        s.observe(&[1.0]).unwrap();
        s.observe(&[2.0]).unwrap();
        assert_eq!(s.accumulator(), Some(5.5));
        assert_eq!(s.t(), 4);
    }

    #[test]
    fn coordinates_accumulate_independently() {
        let cfg = StepsizeConfig::CoordAdagrad { alpha: 1.0, beta: 2.0, epsilon: 0.1 };
        let mut s = StepsizeState::new(cfg, 2).unwrap();
        s.observe(&[0.0, 5.0]).unwrap();
        assert_eq!(s.coordinate_accumulators().unwrap(), &[2.0, 27.0]);
    }

    #[test]
    fn observe_rejects_non_finite() {
        let mut s = StepsizeState::new(global(1.0, 1.0, 0.0), 2).unwrap();
        assert!(matches!(
            s.observe(&[f64::NAN, 0.0]),
            Err(Error::Numerical { t: 1, .. })
        ));
    }

    #[test]
    fn poly_ignores_gradients() {
        let cfg = StepsizeConfig::Poly { power: 1.0, scale: 2.0 };
        let mut s = StepsizeState::new(cfg, 3).unwrap();
        assert_eq!(s.current(), Eta::Scalar(2.0));
        s.observe(&[100.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.current(), Eta::Scalar(1.0));
    }

    #[test]
    fn validation() {
        assert!(StepsizeState::new(global(0.0, 1.0, 0.0), 1).is_err());
        assert!(StepsizeState::new(global(1.0, 0.0, 0.0), 1).is_err());
        assert!(StepsizeState::new(global(1.0, 1.0, 0.6), 1).is_err());
        assert!(StepsizeState::new(global(1.0, 1.0, 0.5), 1).is_ok());
        let biased = StepsizeConfig::BiasedGlobalAdagrad { alpha: 1.0, beta: 1.0, epsilon: 0.0 };
        assert!(matches!(StepsizeState::new(biased, 1), Err(Error::Config { .. })));
        assert!(StepsizeState::new(StepsizeConfig::Poly { power: -1.0, scale: 1.0 }, 1).is_err());
    }

    #[test]
    fn harmonic_schedule_sums() {
        let d = robbins_monro_diagnostic(ScheduleSource::Poly { power: 1.0, scale: 1.0 }, 1_000_000).unwrap();
        let euler_gamma = 0.577_215_664_901_532_9;
        assert!((d.sum_eta - (1e6f64.ln() + euler_gamma)).abs() < 1e-3);
        assert!(d.sum_eta_sq < std::f64::consts::PI.powi(2) / 6.0);
        assert_eq!(d.eta_growth, Growth::LogLike);
        assert_eq!(d.eta_sq_growth, Growth::Saturating);
    }

    #[test]
    fn constant_schedule_sums() {
        let d = robbins_monro_diagnostic(ScheduleSource::Poly { power: 0.0, scale: 0.5 }, 1000).unwrap();
        assert_eq!(d.sum_eta, 500.0);
        assert_eq!(d.sum_eta_sq, 250.0);
        assert_eq!(d.eta_growth, Growth::PowerLike);
    }

    #[test]
    fn recorded_schedule_needs_enough_entries() {
        let seq = [1.0, 0.5];
        assert!(robbins_monro_diagnostic(ScheduleSource::Recorded(&seq), 3).is_err());
        let d = robbins_monro_diagnostic(ScheduleSource::Recorded(&seq), 2).unwrap();
        assert_eq!(d.sum_eta_sq, 1.25);
        assert!(robbins_monro_diagnostic(ScheduleSource::Recorded(&seq), 0).is_err());
    }
}
