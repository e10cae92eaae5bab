//! Estimate containers, normal-approximation and bootstrap confidence
//! intervals, and the log-log regression used by the scaling checks.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::process::SeedSpec;

pub const DEFAULT_CI_LEVEL: f64 = 0.95;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Monte Carlo point estimate with standard error and confidence interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub std_error: f64,
    pub n_reps: u64,
    pub ci_level: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl EstimateWithCI {
    pub fn ci(&self) -> (f64, f64) {
        (self.ci_lo, self.ci_hi)
    }
}

/// Serialized estimator result; `wall_time_ms` is informational and excluded
/// from determinism checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub label: String,
    #[serde(flatten)]
    pub estimate: EstimateWithCI,
    pub seed: SeedSpec,
    pub wall_time_ms: f64,
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Mean of i.i.d. replication values with a normal-approximation CI.
pub fn mean_with_ci(values: &[f64], ci_level: f64) -> Result<EstimateWithCI> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 replications".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let z = normal_quantile(0.5 + ci_level / 2.0);
    Ok(EstimateWithCI {
        estimate: mean,
        std_error: se,
        n_reps: values.len() as u64,
        ci_level,
        ci_lo: mean - z * se,
        ci_hi: mean + z * se,
    })
}

/// Percentile-bootstrap CI for an arbitrary statistic of an i.i.d. sample.
/// The bootstrap standard deviation is reported as the standard error.
pub fn bootstrap_statistic<F, R>(
    values: &[f64],
    statistic: F,
    n_resamples: usize,
    ci_level: f64,
    rng: &mut R,
) -> Result<EstimateWithCI>
where
    F: Fn(&[f64]) -> f64,
    R: Rng,
{
    if values.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 replications".into()));
    }
    let point = statistic(values);
    let mut resample = vec![0.0; values.len()];
    let mut stats = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        for slot in resample.iter_mut() {
            *slot = values[rng.random_range(0..values.len())];
        }
        stats.push(statistic(&resample));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let sd = (stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
        / (stats.len() - 1) as f64)
        .sqrt();
    let (lo, hi) = percentile_bounds(&stats, ci_level);
    Ok(EstimateWithCI {
        estimate: point,
        std_error: sd,
        n_reps: values.len() as u64,
        ci_level,
        ci_lo: lo,
        ci_hi: hi,
    })
}

fn percentile_bounds(sorted: &[f64], ci_level: f64) -> (f64, f64) {
    let alpha = (1.0 - ci_level) / 2.0;
    (quantile_sorted(sorted, alpha), quantile_sorted(sorted, 1.0 - alpha))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Ordinary least squares of `log(y)` on `log(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Fits `log y = intercept + slope * log x` by least squares. All inputs must
/// be positive; at least three pairs are required so the slope has a standard
/// error.
pub fn scaling_regression(pairs: &[(f64, f64)]) -> Result<LogLogFit> {
    if pairs.len() < 3 {
        return Err(Error::InvalidParameter("scaling regression needs >= 3 pairs".into()));
    }
    if pairs.iter().any(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::InvalidParameter("scaling regression needs positive inputs".into()));
    }
    let xs: Vec<f64> = pairs.iter().map(|(x, _)| x.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, y)| y.ln()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("scaling regression needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma2 = rss / (n - 2.0);
    Ok(LogLogFit {
        slope,
        slope_std_error: (sigma2 / sxx).sqrt(),
        intercept,
        residuals,
    })
}
