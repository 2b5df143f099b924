//! Running means and standard errors.

use serde::{Deserialize, Serialize};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Standard error of the mean, `s / √n` with the unbiased sample variance.
    pub se: f64,
    pub n: u64,
}

impl MeanEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }

    /// Mean and standard error of `samples`, summed in the given order.
    pub fn from_samples(samples: &[f64]) -> MeanEstimate {
        let mut w = Welford::default();
        samples.iter().for_each(|&v| w.push(v));
        w.estimate()
    }
}

/// Welford's streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> MeanEstimate {
        let se = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        MeanEstimate {
            mean: if self.n == 0 { f64::NAN } else { self.mean },
            se,
            n: self.n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let est = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(est.mean, 2.5);
        // sample variance 5/3
        assert!((est.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(est.agrees_with(2.0, 1.0));
        assert!(!est.agrees_with(0.0, 1.0));
    }

    #[test]
    fn single_sample_has_zero_error() {
        let est = MeanEstimate::from_samples(&[7.0]);
        assert_eq!((est.mean, est.se, est.n), (7.0, 0.0, 1));
    }
}
