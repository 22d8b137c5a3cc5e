//! Error functionals and fluctuation observables.
//!
//! The mollified L² error between the empirical measure `mu` and the
//! mean-field density `ubar` factors through the pair kernel:
//!
//! ```text
//! ||Z*(mu - ubar)||²  =  (1/N²) sum_{i,j} V(X_i - X_j)
//!                      - (2/N) sum_i (V * ubar)(X_i)
//!                      + <ubar, V * ubar>
//! ```
//!
//! with the diagonal `i = j` included (it contributes `V(0)/N`). The H¹
//! seminorm uses `-ΔV` in place of `V`. Convolutions with `ubar` are
//! computed spectrally on the doubled (free-space) grid, refined 2x, and
//! sampled tricubically at the particle positions; the quadratic form
//! `<ubar, V*ubar>` is grid quadrature. All reductions are pairwise or
//! fixed-order so results do not depend on the thread count.

mod clt;
mod ratefit;
mod testfn;

use std::sync::Arc;

use crate::fields::{refine_double, Box3, FreeConvolver, GridField};
use crate::kernels::{PairTable, RadialKernelSet};
use crate::particles::pair_sums;
use crate::{pairwise_mean, pairwise_sum, Error, Result};

pub use clt::{clt_target_variance, normality_report, DualConfig, NormalityReport};
pub use ratefit::{rate_fit, RateFit};
pub use testfn::TestFunction;

/// Free-space convolvers for one kernel set on one grid; build once and
/// reuse across checkpoints.
pub struct StatKernels {
    set: Arc<RadialKernelSet>,
    grid: Box3,
    conv_v: FreeConvolver,
    conv_lap: FreeConvolver,
    conv_grad: [FreeConvolver; 3],
}

impl StatKernels {
    pub fn new(grid: Box3, set: Arc<RadialKernelSet>) -> Result<Self> {
        let window = (4.0 * set.eta).max(12.0 * grid.h()).min(0.45 * grid.length());
        let conv_v = FreeConvolver::new_radial(grid, |r| set.eval_v(r), Some(window))?;
        let conv_lap = FreeConvolver::new_radial(grid, |r| set.eval_lapv(r), Some(window))?;
        let grad_component = |axis: usize| {
            FreeConvolver::new_vector(grid, |d: [f64; 3]| {
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                set.grad_coeff(r) * d[axis]
            })
        };
        let conv_grad = [grad_component(0)?, grad_component(1)?, grad_component(2)?];
        Ok(Self { set, grid, conv_v, conv_lap, conv_grad })
    }

    pub fn kernel_set(&self) -> &Arc<RadialKernelSet> {
        &self.set
    }

    pub fn grid(&self) -> Box3 {
        self.grid
    }

    /// Convolve the kernel family with one density checkpoint.
    pub fn checkpoint(&self, ubar: &GridField) -> Result<CheckpointKernels> {
        if ubar.grid() != self.grid {
            return Err(Error::Config("density grid does not match the kernel grid".into()));
        }
        let mass = ubar.mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "density must have unit mass, got {mass}"
            )));
        }
        let v = self.conv_v.apply(ubar);
        let lap = self.conv_lap.apply(ubar);
        let v_inner = ubar.inner(&v);
        let lap_inner = ubar.inner(&lap);
        let v_fine = refine_double(&v)?;
        let lap_fine = refine_double(&lap)?;
        let grad_fine = [
            refine_double(&self.conv_grad[0].apply(ubar))?,
            refine_double(&self.conv_grad[1].apply(ubar))?,
            refine_double(&self.conv_grad[2].apply(ubar))?,
        ];
        Ok(CheckpointKernels {
            eta: self.set.eta,
            grid: self.grid,
            v_zero: self.set.eval_v(0.0),
            lap_zero: self.set.eval_lapv(0.0),
            v_inner,
            lap_inner,
            v_fine,
            lap_fine,
            grad_fine,
        })
    }
}

/// Kernel-density convolutions frozen at one checkpoint, ready to be
/// sampled at particle positions.
pub struct CheckpointKernels {
    eta: f64,
    grid: Box3,
    v_zero: f64,
    lap_zero: f64,
    v_inner: f64,
    lap_inner: f64,
    v_fine: GridField,
    lap_fine: GridField,
    grad_fine: [GridField; 3],
}

impl CheckpointKernels {
    fn check_table(&self, table: &PairTable) -> Result<()> {
        let eta = table.kernel_set().eta;
        if (eta - self.eta).abs() > 1e-12 * self.eta {
            return Err(Error::Config(format!(
                "mollification mismatch: pair table eta = {eta}, checkpoint eta = {}",
                self.eta
            )));
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `V(0)` — the diagonal value entering the t = 0 identity.
    pub fn v_zero(&self) -> f64 {
        self.v_zero
    }

    /// `<ubar, V * ubar>` by grid quadrature.
    pub fn v_inner(&self) -> f64 {
        self.v_inner
    }

    /// `(V * ubar)` sampled at a point (tricubic on the refined grid).
    pub fn sample_v(&self, x: [f64; 3]) -> f64 {
        self.v_fine.sample_tricubic(x)
    }

    /// `(ΔV * ubar)` sampled at a point.
    pub fn sample_lap(&self, x: [f64; 3]) -> f64 {
        self.lap_fine.sample_tricubic(x)
    }

    /// `(grad V * ubar)` sampled at a point.
    pub fn sample_grad(&self, x: [f64; 3]) -> [f64; 3] {
        [
            self.grad_fine[0].sample_tricubic(x),
            self.grad_fine[1].sample_tricubic(x),
            self.grad_fine[2].sample_tricubic(x),
        ]
    }

    /// Both squared error functionals from one pass over the pairs:
    /// `(l2_error_sq, h1_error_sq)`.
    pub fn error_terms(&self, x: &[[f64; 3]], table: &PairTable) -> Result<(f64, f64)> {
        self.check_table(table)?;
        let n = x.len();
        if n == 0 {
            return Err(Error::Config("error functional needs at least one particle".into()));
        }
        let nf = n as f64;
        let sums = pair_sums(x, table, &self.grid);

        let v_pair = (pairwise_sum(&sums.v_row) + nf * self.v_zero) / (nf * nf);
        let v_cross: Vec<f64> = x.iter().map(|&p| self.sample_v(p)).collect();
        let l2 = v_pair - 2.0 * pairwise_mean(&v_cross) + self.v_inner;

        let lap_pair = (sums.lap_total + nf * self.lap_zero) / (nf * nf);
        let lap_cross: Vec<f64> = x.iter().map(|&p| self.sample_lap(p)).collect();
        let h1 = -(lap_pair - 2.0 * pairwise_mean(&lap_cross) + self.lap_inner);

        Ok((l2, h1))
    }

    /// Law-of-large-numbers deviations at the companion positions:
    /// the vector statistic uses `grad V`, the scalar one uses `V` itself
    /// (the diagonal `j = i` contributes `0` and `V(0)/N` respectively).
    pub fn lln_deviations(&self, xbar: &[[f64; 3]], table: &PairTable) -> Result<LlnDeviation> {
        self.check_table(table)?;
        let n = xbar.len();
        if n == 0 {
            return Err(Error::Config("LLN statistic needs at least one particle".into()));
        }
        let nf = n as f64;
        let sums = pair_sums(xbar, table, &self.grid);
        let mut vec_max = 0.0f64;
        let mut scalar_max = 0.0f64;
        for i in 0..n {
            let g = self.sample_grad(xbar[i]);
            let mut dev2 = 0.0;
            for c in 0..3 {
                let d = sums.grad[i][c] / nf - g[c];
                dev2 += d * d;
            }
            vec_max = vec_max.max(dev2.sqrt());
            let s = (sums.v_row[i] + self.v_zero) / nf - self.sample_v(xbar[i]);
            scalar_max = scalar_max.max(s.abs());
        }
        Ok(LlnDeviation { vec_max, scalar_max })
    }
}

/// Maximal particle-wise deviation of the empirical kernel averages from
/// their mean-field values.
#[derive(Debug, Clone, Copy)]
pub struct LlnDeviation {
    /// `max_i |(1/N) sum_j grad V(Xbar_i - Xbar_j) - (grad V * ubar)(Xbar_i)|`
    pub vec_max: f64,
    /// Same with the scalar kernel `V`.
    pub scalar_max: f64,
}

/// LLN exceedance report at threshold `N^{-theta}`.
#[derive(Debug, Clone, Copy)]
pub struct LlnReport {
    pub theta: f64,
    pub threshold: f64,
    pub vec_max: f64,
    pub scalar_max: f64,
    pub vec_exceeded: bool,
    pub scalar_exceeded: bool,
}

/// Squared mollified L² error of the empirical measure against `ubar`.
///
/// Convenience form that builds the kernel convolutions for a single call;
/// sweep drivers should build [`StatKernels`]/[`CheckpointKernels`] once
/// and use [`CheckpointKernels::error_terms`].
pub fn l2_error_sq(
    x: &[[f64; 3]],
    ubar: &GridField,
    set: &Arc<RadialKernelSet>,
) -> Result<f64> {
    let kernels = StatKernels::new(ubar.grid(), set.clone())?.checkpoint(ubar)?;
    let table = PairTable::new(set.clone());
    Ok(kernels.error_terms(x, &table)?.0)
}

/// Squared H¹ seminorm error (`-ΔV` in place of `V`).
pub fn h1_error_sq(
    x: &[[f64; 3]],
    ubar: &GridField,
    set: &Arc<RadialKernelSet>,
) -> Result<f64> {
    let kernels = StatKernels::new(ubar.grid(), set.clone())?.checkpoint(ubar)?;
    let table = PairTable::new(set.clone());
    Ok(kernels.error_terms(x, &table)?.1)
}

/// Law-of-large-numbers exceedance statistic at threshold `N^{-theta}`,
/// `theta` in `(0, 1/2)`.
pub fn lln_exceedance(
    xbar: &[[f64; 3]],
    ubar: &GridField,
    set: &Arc<RadialKernelSet>,
    theta: f64,
) -> Result<LlnReport> {
    let kernels = StatKernels::new(ubar.grid(), set.clone())?.checkpoint(ubar)?;
    let table = PairTable::new(set.clone());
    let dev = kernels.lln_deviations(xbar, &table)?;
    Ok(lln_report(dev, xbar.len(), theta))
}

/// Assemble the exceedance report from precomputed deviations.
pub fn lln_report(dev: LlnDeviation, n: usize, theta: f64) -> LlnReport {
    let threshold = (n as f64).powf(-theta);
    LlnReport {
        theta,
        threshold,
        vec_max: dev.vec_max,
        scalar_max: dev.scalar_max,
        vec_exceeded: dev.vec_max > threshold,
        scalar_exceeded: dev.scalar_max > threshold,
    }
}

/// `sqrt(N) ((1/N) sum_i phi(X_i) - <ubar, phi>)`, the fluctuation field
/// paired with a test function. `phi` is evaluated in closed form at the
/// particles; the density pairing is grid quadrature.
pub fn fluctuation_pairing(x: &[[f64; 3]], ubar: &GridField, phi: &TestFunction) -> f64 {
    let phi_grid = phi.render(ubar.grid());
    fluctuation_pairing_fn(x, ubar, |p| phi.value(p), &phi_grid)
}

/// Core fluctuation pairing with a pre-rendered grid image of `phi`.
pub fn fluctuation_pairing_fn(
    x: &[[f64; 3]],
    ubar: &GridField,
    phi: impl Fn([f64; 3]) -> f64,
    phi_grid: &GridField,
) -> f64 {
    let n = x.len() as f64;
    let values: Vec<f64> = x.iter().map(|&p| phi(p)).collect();
    n.sqrt() * (pairwise_mean(&values) - ubar.inner(phi_grid))
}

/// One fluctuation observation, ready for the CSV sink.
#[derive(Debug, Clone)]
pub struct FluctuationSample {
    pub realization_id: u64,
    pub t: f64,
    pub phi_id: String,
    pub value: f64,
}

/// Per-realization error time series with its aggregate statistics.
#[derive(Debug, Clone)]
pub struct ErrorSample {
    pub realization_id: u64,
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    /// Running supremum of `l2` over the checkpoints.
    pub sup_l2: f64,
    /// Trapezoid integral of `h1` over the checkpoint times.
    pub h1_integral: f64,
    /// True if some `l2` value fell below the `-1e-12` cancellation floor.
    pub floor_violation: bool,
}

impl ErrorSample {
    pub fn new(realization_id: u64, times: Vec<f64>, l2: Vec<f64>, h1: Vec<f64>) -> Result<Self> {
        if times.len() != l2.len() || times.len() != h1.len() || times.is_empty() {
            return Err(Error::Config("error series needs aligned, nonempty columns".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) && times.len() > 1 {
            return Err(Error::Config("checkpoint times must increase".into()));
        }
        let sup_l2 = l2.iter().cloned().fold(f64::MIN, f64::max);
        let mut h1_integral = 0.0;
        for k in 1..times.len() {
            h1_integral += 0.5 * (times[k] - times[k - 1]) * (h1[k] + h1[k - 1]);
        }
        let floor_violation = l2.iter().any(|&v| v < -1e-12);
        if floor_violation {
            eprintln!(
                "warning: realization {realization_id} produced an l2 error below the \
                 cancellation floor: min = {:?}",
                l2.iter().cloned().fold(f64::MAX, f64::min)
            );
        }
        Ok(Self { realization_id, times, l2, h1, sup_l2, h1_integral, floor_violation })
    }

    /// The mean-square rate statistic `sup_t l2 + sigma * integral h1 dt`.
    pub fn rate_statistic(&self, sigma: f64) -> f64 {
        self.sup_l2 + sigma * self.h1_integral
    }
}
