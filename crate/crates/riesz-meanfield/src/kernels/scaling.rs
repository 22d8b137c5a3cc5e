//! Sup-norm growth of the mollified kernels along the moderate-interaction
//! schedule eta = N^{-beta}. The derivative bounds
//!   ||D^k V_eta||_inf <= C N^{beta (lambda + k)},   ||Z_eta||_{L^2} <= C N^{beta lambda / 2}
//! are checked empirically: measure the norms over a geometric range of N
//! and fit log-log slopes.

use crate::numerics::ols_slope;
use crate::{Error, Result};

use super::build_kernel_set;

#[derive(Debug, Clone, serde::Serialize)]
pub struct ScalingPoint {
    pub n_particles: u64,
    pub eta: f64,
    pub sup_v: f64,
    pub sup_dv: f64,
    pub sup_lapv: f64,
    pub z_l2: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ScalingReport {
    pub lambda: f64,
    pub beta: f64,
    pub points: Vec<ScalingPoint>,
    /// Fitted log-log slopes of the four norms in N.
    pub slope_v: f64,
    pub slope_dv: f64,
    pub slope_lapv: f64,
    pub slope_z: f64,
    /// Theoretical values beta lambda, beta (lambda+1), beta (lambda+2),
    /// beta lambda / 2.
    pub expected: [f64; 4],
}

impl ScalingReport {
    /// Largest relative deviation of a fitted slope from its theoretical
    /// value.
    pub fn worst_relative_error(&self) -> f64 {
        let got = [self.slope_v, self.slope_dv, self.slope_lapv, self.slope_z];
        got.iter()
            .zip(&self.expected)
            .map(|(g, e)| ((g - e) / e).abs())
            .fold(0.0, f64::max)
    }
}

fn sup_abs(t: &super::RadialTable) -> f64 {
    t.values()
        .iter()
        .map(|v| v.abs())
        .fold(t.value_at_zero().abs(), f64::max)
}

/// Measure kernel norms for each N in `ns` (at least four values, strictly
/// increasing) and fit the growth exponents.
pub fn scaling_report(lambda: f64, beta: f64, ns: &[u64]) -> Result<ScalingReport> {
    if ns.len() < 4 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "scaling check needs at least four strictly increasing particle counts".into(),
        ));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Config(format!(
            "moderate-interaction exponent out of range (0, 1/2): {beta}"
        )));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let eta = (n as f64).powf(-beta);
        let set = build_kernel_set(lambda, eta)?;
        points.push(ScalingPoint {
            n_particles: n,
            eta,
            sup_v: sup_abs(&set.v),
            sup_dv: sup_abs(&set.dv),
            sup_lapv: sup_abs(&set.lapv),
            z_l2: set.z_l2(),
        });
    }
    let ln_n: Vec<f64> = points.iter().map(|p| (p.n_particles as f64).ln()).collect();
    let fit = |sel: fn(&ScalingPoint) -> f64| -> f64 {
        let y: Vec<f64> = points.iter().map(|p| sel(p).ln()).collect();
        ols_slope(&ln_n, &y).0
    };
    Ok(ScalingReport {
        lambda,
        beta,
        slope_v: fit(|p| p.sup_v),
        slope_dv: fit(|p| p.sup_dv),
        slope_lapv: fit(|p| p.sup_lapv),
        slope_z: fit(|p| p.z_l2),
        expected: [
            beta * lambda,
            beta * (lambda + 1.0),
            beta * (lambda + 2.0),
            beta * lambda / 2.0,
        ],
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_schedules() {
        assert!(scaling_report(0.5, 0.05, &[1024, 512, 2048, 4096]).is_err());
        assert!(scaling_report(0.5, 0.05, &[1024, 2048]).is_err());
        assert!(scaling_report(0.5, 0.9, &[1024, 2048, 4096, 8192]).is_err());
    }
}
