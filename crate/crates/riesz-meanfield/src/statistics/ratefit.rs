//! Log–log rate fitting with a bootstrap confidence interval.

use crate::numerics::ols_slope;
use crate::rng::{splitmix64, uniform01};
use crate::{pairwise_mean, Error, Result};

/// Fitted convergence rate of Monte Carlo means over a geometric ladder
/// of particle counts.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateFit {
    /// OLS slope of `log mean` against `log N`.
    pub slope: f64,
    pub intercept: f64,
    /// Two-sided 95% bootstrap percentile interval for the slope.
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// One-sided 95% upper bootstrap bound (95th percentile).
    pub upper95: f64,
    /// Per-N Monte Carlo means that entered the fit.
    pub means: Vec<f64>,
    /// Number of bootstrap replicates.
    pub replicates: usize,
}

/// Fit `mean_N ~ C N^slope` by OLS on logs; the confidence interval
/// resamples realizations within each `N` (percentile bootstrap with a
/// deterministic seed).
pub fn rate_fit(
    n_list: &[usize],
    samples: &[Vec<f64>],
    replicates: usize,
    seed: u64,
) -> Result<RateFit> {
    if n_list.len() < 4 {
        return Err(Error::Config(format!(
            "rate fit needs at least 4 particle counts, got {}",
            n_list.len()
        )));
    }
    if n_list.len() != samples.len() {
        return Err(Error::Config("one sample set per particle count required".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("particle counts must increase".into()));
    }
    let first_ratio = n_list[1] as f64 / n_list[0] as f64;
    for w in n_list.windows(2) {
        let r = w[1] as f64 / w[0] as f64;
        if (r - first_ratio).abs() > 0.2 * first_ratio {
            return Err(Error::Config(
                "particle counts must form an (approximately) geometric ladder".into(),
            ));
        }
    }
    for (k, s) in samples.iter().enumerate() {
        if s.len() < 30 {
            return Err(Error::Config(format!(
                "N = {}: need at least 30 realizations, got {}",
                n_list[k],
                s.len()
            )));
        }
    }
    let log_n: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let means: Vec<f64> = samples.iter().map(|s| pairwise_mean(s)).collect();
    if means.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Config(format!(
            "Monte Carlo means must be positive for the log fit, got {means:?}"
        )));
    }
    let log_means: Vec<f64> = means.iter().map(|&m| m.ln()).collect();
    let (slope, intercept) = ols_slope(&log_n, &log_means);

    if replicates < 100 {
        return Err(Error::Config(format!(
            "bootstrap needs at least 100 replicates, got {replicates}"
        )));
    }
    let mut state = seed ^ 0x9E37_79B9_7F4A_7C15;
    let mut slopes = Vec::with_capacity(replicates);
    let mut resampled = vec![0.0f64; 0];
    for _ in 0..replicates {
        let mut boot_logs = Vec::with_capacity(samples.len());
        let mut degenerate = false;
        for s in samples {
            let len = s.len();
            resampled.clear();
            resampled.reserve(len);
            for _ in 0..len {
                let idx = (uniform01(splitmix64(&mut state)) * len as f64) as usize;
                resampled.push(s[idx.min(len - 1)]);
            }
            let m = pairwise_mean(&resampled);
            if !(m > 0.0) {
                degenerate = true;
                break;
            }
            boot_logs.push(m.ln());
        }
        if degenerate {
            continue;
        }
        slopes.push(ols_slope(&log_n, &boot_logs).0);
    }
    if slopes.len() < replicates / 2 {
        return Err(Error::Numerical(
            "more than half of the bootstrap replicates were degenerate".into(),
        ));
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).expect("finite slopes"));
    let quantile = |p: f64| -> f64 {
        let pos = p * (slopes.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as f64;
        slopes[lo] * (1.0 - w) + slopes[hi] * w
    };

    Ok(RateFit {
        slope,
        intercept,
        ci_lower: quantile(0.025),
        ci_upper: quantile(0.975),
        upper95: quantile(0.95),
        means,
        replicates: slopes.len(),
    })
}
