//! Empirical rate exponents by least squares in log-log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub metric: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub horizons: Vec<u64>,
}

/// Fits `ln value = intercept + slope · ln T` by ordinary least squares.
///
/// Points are sorted by horizon; at least three distinct horizons and
/// strictly positive values are required.
pub fn fit_rate(metric: &str, points: &[(u64, f64)]) -> Result<RateEstimate> {
    if points.len() < 3 {
        return Err(Error::config(
            "horizons",
            format!("a rate fit needs at least 3 points, got {}", points.len()),
        ));
    }
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.0);
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::config("horizons", "horizons must be distinct"));
    }
    if let Some(&(t, v)) = pts.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite()) || p.0 == 0) {
        return Err(Error::config(
            metric,
            format!(
                "value {v:e} at T={t} cannot enter a log fit; raise the noise floor or drop the horizons where the metric vanishes"
            ),
        ));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateEstimate {
        metric: metric.to_string(),
        slope,
        intercept,
        r_squared,
        horizons: pts.iter().map(|p| p.0).collect(),
    })
}
