//! Central-limit targets and normality diagnostics.
//!
//! The asymptotic variance of the fluctuation pairing `<F(t), phi>` is
//!
//! ```text
//! Var = <u0, T(0)²> - <u0, T(0)>² + 2 sigma ∫_0^t <u(s), |grad T(s)|²> ds
//! ```
//!
//! where `T(s)` solves the backward dual of the linearized equation with
//! terminal condition `phi` at time `t`.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::testfn::TestFunction;
use crate::fields::{backward_dual, spectral_gradient, Trajectory};
use crate::{pairwise_mean, pairwise_sum, Error, Result};

/// Options for the dual solve behind the variance target.
#[derive(Debug, Clone, Copy)]
pub struct DualConfig {
    /// Evaluate the time integrand every `time_stride` stored steps
    /// (must divide the number of steps up to `t`). 1 = every step.
    pub time_stride: usize,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self { time_stride: 1 }
    }
}

/// Predicted fluctuation variance for the pairing with `phi` at time `t`,
/// from the trajectory of the limiting (or mollified) equation.
pub fn clt_target_variance(
    phi: &TestFunction,
    t: f64,
    traj: &Trajectory,
    cfg: &DualConfig,
) -> Result<f64> {
    if cfg.time_stride == 0 {
        return Err(Error::Config("time_stride must be positive".into()));
    }
    let end = traj.index_of_time(t)?;
    if end % cfg.time_stride != 0 {
        return Err(Error::Config(format!(
            "time_stride {} does not divide the {end} steps up to t = {t}",
            cfg.time_stride
        )));
    }
    let grid = traj.params().grid;
    let terminal = phi.render(grid);
    let duals = backward_dual(traj, &terminal, end)?;

    let u0 = traj.field(0);
    let t0 = &duals[0];
    let m1 = u0.inner(t0);
    let m2 = u0.inner(&t0.pointwise_mul(t0));

    let mut integral = 0.0;
    if end > 0 {
        let dt_eff = traj.stored_dt() * cfg.time_stride as f64;
        let nodes: Vec<usize> = (0..=end).step_by(cfg.time_stride).collect();
        let mut values = Vec::with_capacity(nodes.len());
        for &n in &nodes {
            let g = spectral_gradient(&duals[n]);
            let mut gsq = g[0].pointwise_mul(&g[0]);
            gsq.add_scaled(&g[1].pointwise_mul(&g[1]), 1.0);
            gsq.add_scaled(&g[2].pointwise_mul(&g[2]), 1.0);
            values.push(traj.field(n).inner(&gsq));
        }
        for k in 1..values.len() {
            integral += 0.5 * dt_eff * (values[k] + values[k - 1]);
        }
    }

    Ok(m2 - m1 * m1 + 2.0 * traj.params().sigma * integral)
}

/// Distributional diagnostics of fluctuation samples against the normal
/// law `N(0, target_variance)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormalityReport {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// 99% chi-square acceptance interval for the sample variance under
    /// the hypothesis that the population variance equals the target.
    pub var_ci99: (f64, f64),
    /// Whether the sample variance falls inside `var_ci99`.
    pub var_in_ci: bool,
    /// Kolmogorov–Smirnov statistic against `N(0, target_variance)`.
    pub ks_stat: f64,
    /// Asymptotic KS p-value (Stephens' finite-sample adjustment).
    pub ks_p: f64,
    /// Sup distance between the empirical characteristic function and
    /// `exp(-theta² Var / 2)` over 21 points in `[-3, 3]/sqrt(Var)`.
    pub cf_distance: f64,
}

pub fn normality_report(samples: &[f64], target_variance: f64) -> Result<NormalityReport> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::Config(format!(
            "normality report needs at least 100 samples, got {n}"
        )));
    }
    if !(target_variance > 0.0) || !target_variance.is_finite() {
        return Err(Error::Config(format!(
            "degenerate target variance {target_variance}"
        )));
    }
    let nf = n as f64;
    let mean = pairwise_mean(samples);
    let devs: Vec<f64> = samples.iter().map(|&s| (s - mean) * (s - mean)).collect();
    let variance = pairwise_sum(&devs) / (nf - 1.0);

    let chi = ChiSquared::new(nf - 1.0)
        .map_err(|e| Error::Numerical(format!("chi-square with {n} samples: {e}")))?;
    let lo = target_variance * chi.inverse_cdf(0.005) / (nf - 1.0);
    let hi = target_variance * chi.inverse_cdf(0.995) / (nf - 1.0);

    let std = target_variance.sqrt();
    let law = Normal::new(0.0, std)
        .map_err(|e| Error::Numerical(format!("normal target: {e}")))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut ks = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = law.cdf(x);
        ks = ks.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let ks_p = ks_p_value(ks, nf);

    // Empirical characteristic function against the normal target.
    let theta_max = 3.0 / std;
    let mut cf_distance = 0.0f64;
    for k in 0..21 {
        let theta = -theta_max + k as f64 * theta_max / 10.0;
        let cos: Vec<f64> = samples.iter().map(|&s| (theta * s).cos()).collect();
        let sin: Vec<f64> = samples.iter().map(|&s| (theta * s).sin()).collect();
        let re = pairwise_mean(&cos) - (-0.5 * theta * theta * target_variance).exp();
        let im = pairwise_mean(&sin);
        cf_distance = cf_distance.max((re * re + im * im).sqrt());
    }

    Ok(NormalityReport {
        n,
        mean,
        variance,
        var_ci99: (lo, hi),
        var_in_ci: variance >= lo && variance <= hi,
        ks_stat: ks,
        ks_p,
        cf_distance,
    })
}

/// Kolmogorov asymptotic tail with Stephens' finite-sample correction:
/// `p = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j² x²)` at
/// `x = D (sqrt(n) + 0.12 + 0.11/sqrt(n))`.
fn ks_p_value(d: f64, n: f64) -> f64 {
    let x = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    if x < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * x * x).exp();
        p += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * p).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_tail_matches_reference_points() {
        // Kolmogorov distribution: Q(0.8284...) ≈ 0.5 (median of sup|B|).
        // For large n the correction is negligible; check limiting values.
        let n = 1e12f64;
        let p_median = ks_p_value(0.82757 / n.sqrt(), n);
        assert!((p_median - 0.5).abs() < 1e-3, "median tail {p_median}");
        let p_09 = ks_p_value(1.2238 / n.sqrt(), n);
        assert!((p_09 - 0.1).abs() < 1e-3, "10% tail {p_09}");
    }

    #[test]
    fn report_rejects_degenerate_inputs() {
        let samples = vec![0.0; 200];
        assert!(normality_report(&samples, 0.0).is_err());
        assert!(normality_report(&samples[..50], 1.0).is_err());
    }
}
