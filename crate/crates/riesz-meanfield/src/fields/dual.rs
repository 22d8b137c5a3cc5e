//! Linearised forward propagation and its exact discrete adjoint.
//!
//! Writing one solver step as `u_{n+1} = H(u_n - dt * div(u_n b(u_n)))`
//! with `H` the implicit diffusion multiplier, the linearisation along a
//! stored trajectory propagates a perturbation `f` as
//!
//! `f_{n+1} = H[f_n - dt sum_a d_a^P(f_n G_a + u_n A_a f_n)]`,
//!
//! where `G_a` are the drift fields of the step, `A_a f = kappa
//! IFFT(P i k_a S f^)` is the interaction gradient, and `d_a^P` the
//! dealiased spectral derivative. The backward dual iterates the exact
//! transpose of that linear map with respect to the grid inner product:
//!
//! `v_n = w + dt sum_a [G_a d_a^P w - A_a(u_n d_a^P w)]`, `w = H v_{n+1}`.
//!
//! Because each backward step is the literal matrix transpose of the
//! corresponding forward step, the pairing `<f_n, v_n>` is independent of
//! `n` up to floating-point roundoff — no discretisation error enters.

use rustfft::num_complex::Complex;

use super::fft::Fft3;
use super::solver::{SpectralEngine, Trajectory};
use super::GridField;
use crate::{Error, Result};

fn engine_for(traj: &Trajectory) -> Result<SpectralEngine> {
    if !traj.is_store_all() {
        return Err(Error::Config(
            "linearised/dual solves need a store-all trajectory (save_every = 1)".into(),
        ));
    }
    let p = traj.params();
    Ok(SpectralEngine::new(p.grid, traj.interaction(), p.sigma, p.kappa, p.dt))
}

fn drift_at(traj: &Trajectory, engine: &SpectralEngine, n: usize) -> [GridField; 3] {
    if let Some(b) = traj.drift(n) {
        b.clone()
    } else {
        engine.drift_fields(&engine.spectrum(traj.field(n)))
    }
}

fn interaction_is_active(traj: &Trajectory) -> bool {
    !traj.interaction().is_none() && traj.params().kappa != 0.0
}

/// Propagate an initial perturbation `f0` given at step `start` through
/// the linearised dynamics along `traj` up to step `end`; returns the
/// perturbation at `traj.times()[end]`.
pub fn forward_linearized(
    traj: &Trajectory,
    f0: &GridField,
    start: usize,
    end: usize,
) -> Result<GridField> {
    let engine = engine_for(traj)?;
    if start > end || end > traj.n_steps() {
        return Err(Error::Config(format!(
            "linearised window [{start}, {end}] outside the trajectory"
        )));
    }
    let dt = traj.params().dt;
    let active = interaction_is_active(traj);
    let mut fhat = engine.spectrum(f0);
    engine.dealias(&mut fhat);
    for n in start..end {
        if active {
            let f_real = engine.to_field(fhat.clone());
            let g = drift_at(traj, &engine, n);
            let af = engine.interaction_grad(&fhat);
            let u_n = traj.field(n);
            let w = [
                f_real.pointwise_mul(&g[0]).also_add_product(u_n, &af[0]),
                f_real.pointwise_mul(&g[1]).also_add_product(u_n, &af[1]),
                f_real.pointwise_mul(&g[2]).also_add_product(u_n, &af[2]),
            ];
            let div = engine.div_projected(&w);
            for (f, d) in fhat.iter_mut().zip(&div) {
                *f -= *d * dt;
            }
        }
        engine.heat_multiply(&mut fhat);
    }
    Ok(engine.to_field(fhat))
}

/// Solve the backward dual of the linearised equation from the terminal
/// condition given at step `end`; returns the dual field at every stored
/// time up to there (index `n` matching `traj.times()[n]`, length
/// `end + 1`).
///
/// Every returned field is projected onto the dealiased band. The forward
/// linearised map acts entirely inside that band, so with the projection
/// each backward step is the literal transpose of the corresponding
/// forward step as a map on raw grid data — pairings are exact to roundoff
/// for arbitrary (unprojected) initial perturbations.
pub fn backward_dual(
    traj: &Trajectory,
    terminal: &GridField,
    end: usize,
) -> Result<Vec<GridField>> {
    let engine = engine_for(traj)?;
    if end > traj.n_steps() {
        return Err(Error::Config(format!("dual terminal step {end} outside the trajectory")));
    }
    let dt = traj.params().dt;
    let active = interaction_is_active(traj);

    let mut vhat = engine.spectrum(terminal);
    engine.dealias(&mut vhat);
    let mut duals = vec![GridField::zeros(traj.params().grid); end + 1];
    duals[end] = engine.to_field(vhat.clone());

    for n in (0..end).rev() {
        // w = H v_{n+1}; vhat enters each iteration dealiased.
        engine.heat_multiply(&mut vhat);
        let w = engine.to_field(vhat.clone());
        if active {
            let d = engine.grad_projected(&vhat);
            let g = drift_at(traj, &engine, n);
            let u_n = traj.field(n);
            // A_a(u_n d_a), summed over axes.
            let q = [
                u_n.pointwise_mul(&d[0]),
                u_n.pointwise_mul(&d[1]),
                u_n.pointwise_mul(&d[2]),
            ];
            let mut agg = GridField::zeros(traj.params().grid);
            for a in 0..3 {
                let qa_hat = engine.spectrum(&q[a]);
                let aq = engine.interaction_grad_axis(&qa_hat, a);
                agg.add_scaled(&aq, 1.0);
            }
            let mut out = w;
            for a in 0..3 {
                let gd = g[a].pointwise_mul(&d[a]);
                out.add_scaled(&gd, dt);
            }
            out.add_scaled(&agg, -dt);
            vhat = engine.spectrum(&out);
            engine.dealias(&mut vhat);
            duals[n] = engine.to_field(vhat.clone());
        } else {
            duals[n] = w;
        }
    }
    Ok(duals)
}

/// `int |grad f|^2 dx` under the grid quadrature, via the spectral
/// gradient (exact for band-limited fields).
pub fn grad_norm_sq(f: &GridField) -> f64 {
    let g = spectral_gradient(f);
    g.iter().map(|c| c.inner(c)).sum()
}

/// Plain (non-dealiased) spectral gradient with the Nyquist mode zeroed,
/// for evaluating `|grad T|^2` in variance quadratures.
pub fn spectral_gradient(f: &GridField) -> [GridField; 3] {
    let grid = f.grid();
    let m = grid.m();
    let fft = Fft3::new(m);
    let fhat = fft.forward(f);
    let k: Vec<f64> =
        (0..m).map(|i| if i == m / 2 { 0.0 } else { grid.wavenumber(i) }).collect();
    let mut out = [GridField::zeros(grid), GridField::zeros(grid), GridField::zeros(grid)];
    for (axis, slot) in out.iter_mut().enumerate() {
        let mut spec = vec![Complex::default(); fhat.len()];
        let mut idx = 0;
        for ix in 0..m {
            for iy in 0..m {
                for iz in 0..m {
                    let ka = match axis {
                        0 => k[ix],
                        1 => k[iy],
                        _ => k[iz],
                    };
                    let c = fhat[idx];
                    spec[idx] = Complex::new(-ka * c.im, ka * c.re);
                    idx += 1;
                }
            }
        }
        *slot = fft.inverse(spec, grid);
    }
    out
}

impl GridField {
    /// `self + u * v`, consuming self (helper for drift assembly).
    fn also_add_product(mut self, u: &GridField, v: &GridField) -> GridField {
        assert_eq!(self.grid(), u.grid());
        let prod = u.pointwise_mul(v);
        self.add_scaled(&prod, 1.0);
        self
    }
}
