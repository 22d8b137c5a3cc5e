//! Semi-implicit spectral solver for the nonlocal transport-diffusion
//! equation
//!
//! `d/dt u = sigma Laplace(u) - div(u b(u))`, `b(u) = kappa grad(W * u)`,
//!
//! where `W` is either the mollified interaction kernel or its singular
//! limit. Diffusion is treated implicitly in Fourier space, the transport
//! term explicitly, with 2/3-rule dealiasing of the quadratic product. The
//! zero mode is untouched by both pieces, so mass is conserved to roundoff.

use std::sync::Arc;

use rustfft::num_complex::Complex;

use super::fft::Fft3;
use super::{Box3, GridField};
use crate::kernels::{symbol_phi, RadialKernelSet};
use crate::{Error, Result};

/// Interaction entering the drift `b(u) = kappa grad(W * u)`.
#[derive(Clone)]
pub enum Interaction {
    /// No interaction: pure heat flow (drift identically zero).
    None,
    /// Singular Riesz limit kernel.
    Limit { lambda: f64 },
    /// Mollified kernel at fixed width.
    Mollified(Arc<RadialKernelSet>),
}

impl Interaction {
    /// Fourier symbol of `W` at wavenumber magnitude `k > 0`.
    pub fn symbol(&self, k: f64) -> f64 {
        match self {
            Interaction::None => 0.0,
            Interaction::Limit { lambda } => symbol_phi(*lambda, k),
            Interaction::Mollified(set) => set.symbol_v(k),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Interaction::None)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PdeParams {
    pub grid: Box3,
    pub sigma: f64,
    pub kappa: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Store the drift fields at every checkpoint alongside the solution
    /// (needed when particle dynamics are driven by the stored mean-field
    /// drift).
    pub store_drift: bool,
    /// Checkpoint stride in steps: 1 stores every step (required by the
    /// linearised/dual solvers), larger values thin the stored trajectory.
    pub save_every: usize,
}

impl PdeParams {
    fn validate(&self) -> Result<usize> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !self.kappa.is_finite() {
            return Err(Error::Config("kappa must be finite".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        let steps = (self.t_end / self.dt).round();
        if steps < 1.0 || ((steps * self.dt - self.t_end) / self.t_end).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "t_end = {} is not an integer number of steps of dt = {}",
                self.t_end, self.dt
            )));
        }
        let steps = steps as usize;
        if self.save_every == 0 || steps % self.save_every != 0 {
            return Err(Error::Config(format!(
                "save_every = {} must be >= 1 and divide the {} steps",
                self.save_every, steps
            )));
        }
        Ok(steps)
    }
}

/// Precomputed spectral data shared by the forward solver, the linearised
/// propagator, and its adjoint.
pub(crate) struct SpectralEngine {
    grid: Box3,
    fft: Fft3,
    /// Axis wavenumbers by FFT index.
    k_axis: Vec<f64>,
    /// 2/3-rule dealias mask by FFT index.
    keep: Vec<bool>,
    /// Interaction symbol over the full cube (zero at the origin mode).
    s_cube: Vec<f64>,
    /// Implicit diffusion multiplier `1/(1 + sigma dt k^2)`.
    heat: Vec<f64>,
    kappa: f64,
    /// Explicit transport step size.
    dt: f64,
}

impl SpectralEngine {
    pub(crate) fn new(
        grid: Box3,
        interaction: &Interaction,
        sigma: f64,
        kappa: f64,
        dt: f64,
    ) -> Self {
        let m = grid.m();
        let k_axis: Vec<f64> = (0..m).map(|i| grid.wavenumber(i)).collect();
        let keep: Vec<bool> = (0..m)
            .map(|i| 3 * grid.signed_mode(i).unsigned_abs() as usize <= m)
            .collect();
        let mut s_cube = vec![0.0f64; grid.size()];
        let mut heat = vec![0.0f64; grid.size()];
        let mut idx = 0;
        for ix in 0..m {
            let kx2 = k_axis[ix] * k_axis[ix];
            for iy in 0..m {
                let ky2 = k_axis[iy] * k_axis[iy];
                for iz in 0..m {
                    let k2 = kx2 + ky2 + k_axis[iz] * k_axis[iz];
                    heat[idx] = 1.0 / (1.0 + sigma * dt * k2);
                    if k2 > 0.0 {
                        s_cube[idx] = interaction.symbol(k2.sqrt());
                    }
                    idx += 1;
                }
            }
        }
        Self { grid, fft: Fft3::new(m), k_axis, keep, s_cube, heat, kappa, dt }
    }

    pub(crate) fn spectrum(&self, f: &GridField) -> Vec<Complex<f64>> {
        self.fft.forward(f)
    }

    pub(crate) fn to_field(&self, spec: Vec<Complex<f64>>) -> GridField {
        self.fft.inverse(spec, self.grid)
    }

    pub(crate) fn dealias(&self, spec: &mut [Complex<f64>]) {
        let m = self.grid.m();
        let mut idx = 0;
        for ix in 0..m {
            let okx = self.keep[ix];
            for iy in 0..m {
                let okxy = okx && self.keep[iy];
                for iz in 0..m {
                    if !(okxy && self.keep[iz]) {
                        spec[idx] = Complex::default();
                    }
                    idx += 1;
                }
            }
        }
    }

    pub(crate) fn heat_multiply(&self, spec: &mut [Complex<f64>]) {
        for (c, &h) in spec.iter_mut().zip(&self.heat) {
            *c *= h;
        }
    }

    /// One derivative component in the dealiased band: `IFFT(P i k_a f^)`.
    fn axis_derivative(&self, fhat: &[Complex<f64>], axis: usize, with_symbol: bool) -> GridField {
        let m = self.grid.m();
        let mut spec = vec![Complex::default(); fhat.len()];
        let mut idx = 0;
        for ix in 0..m {
            let okx = self.keep[ix];
            for iy in 0..m {
                let okxy = okx && self.keep[iy];
                for iz in 0..m {
                    if okxy && self.keep[iz] {
                        let ka = match axis {
                            0 => self.k_axis[ix],
                            1 => self.k_axis[iy],
                            _ => self.k_axis[iz],
                        };
                        let amp = if with_symbol { ka * self.s_cube[idx] } else { ka };
                        let f = fhat[idx];
                        // multiply by i * amp
                        spec[idx] = Complex::new(-amp * f.im, amp * f.re);
                    }
                    idx += 1;
                }
            }
        }
        self.to_field(spec)
    }

    /// Dealiased spectral gradient `(IFFT(P i k_a f^))_a`.
    pub(crate) fn grad_projected(&self, fhat: &[Complex<f64>]) -> [GridField; 3] {
        [
            self.axis_derivative(fhat, 0, false),
            self.axis_derivative(fhat, 1, false),
            self.axis_derivative(fhat, 2, false),
        ]
    }

    /// The drift operator `A_a f = kappa IFFT(P i k_a S f^)` applied to a
    /// spectrum; returns real fields.
    pub(crate) fn interaction_grad(&self, fhat: &[Complex<f64>]) -> [GridField; 3] {
        let mut out = [
            self.axis_derivative(fhat, 0, true),
            self.axis_derivative(fhat, 1, true),
            self.axis_derivative(fhat, 2, true),
        ];
        for f in &mut out {
            f.scale(self.kappa);
        }
        out
    }

    /// One component of the drift operator: `kappa IFFT(P i k_a S f^)`.
    pub(crate) fn interaction_grad_axis(&self, fhat: &[Complex<f64>], axis: usize) -> GridField {
        let mut f = self.axis_derivative(fhat, axis, true);
        f.scale(self.kappa);
        f
    }

    /// Dealiased spectral divergence `sum_a P i k_a FFT(w_a)`.
    pub(crate) fn div_projected(&self, w: &[GridField; 3]) -> Vec<Complex<f64>> {
        let m = self.grid.m();
        let mut acc = vec![Complex::default(); self.grid.size()];
        for (axis, comp) in w.iter().enumerate() {
            let what = self.fft.forward(comp);
            let mut idx = 0;
            for ix in 0..m {
                let okx = self.keep[ix];
                for iy in 0..m {
                    let okxy = okx && self.keep[iy];
                    for iz in 0..m {
                        if okxy && self.keep[iz] {
                            let ka = match axis {
                                0 => self.k_axis[ix],
                                1 => self.k_axis[iy],
                                _ => self.k_axis[iz],
                            };
                            let f = what[idx];
                            acc[idx] += Complex::new(-ka * f.im, ka * f.re);
                        }
                        idx += 1;
                    }
                }
            }
        }
        acc
    }

    /// Advance the nonlinear solution one step, using the drift fields `b`
    /// already evaluated at the current time. Returns the new real field.
    fn step(
        &self,
        uhat: &mut Vec<Complex<f64>>,
        u_real: &GridField,
        b: Option<&[GridField; 3]>,
    ) -> GridField {
        if let Some(b) = b {
            let w = [
                u_real.pointwise_mul(&b[0]),
                u_real.pointwise_mul(&b[1]),
                u_real.pointwise_mul(&b[2]),
            ];
            let div = self.div_projected(&w);
            for (u, d) in uhat.iter_mut().zip(&div) {
                *u -= *d * self.dt;
            }
        }
        self.heat_multiply(uhat);
        self.to_field(uhat.clone())
    }

    /// Drift fields for a given spectrum (public entry for observers).
    pub(crate) fn drift_fields(&self, uhat: &[Complex<f64>]) -> [GridField; 3] {
        self.interaction_grad(uhat)
    }
}

/// Solution trajectory: the field at every stored checkpoint (and
/// optionally the drift fields), plus everything needed to rebuild the
/// stepping operators. With `save_every = 1` every step is stored.
pub struct Trajectory {
    pub(crate) params: PdeParams,
    pub(crate) interaction: Interaction,
    times: Vec<f64>,
    fields: Vec<GridField>,
    drifts: Option<Vec<[GridField; 3]>>,
}

impl Trajectory {
    pub fn params(&self) -> &PdeParams {
        &self.params
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    /// Stored checkpoint times, starting at 0.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of stored intervals (equals the solver step count when
    /// `save_every = 1`).
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Whether every solver step was stored.
    pub fn is_store_all(&self) -> bool {
        self.params.save_every == 1
    }

    /// Time between stored checkpoints.
    pub fn stored_dt(&self) -> f64 {
        self.params.dt * self.params.save_every as f64
    }

    pub fn field(&self, n: usize) -> &GridField {
        &self.fields[n]
    }

    pub fn final_field(&self) -> &GridField {
        self.fields.last().unwrap()
    }

    /// Drift fields at checkpoint time `times[n]`.
    pub fn drift(&self, n: usize) -> Option<&[GridField; 3]> {
        self.drifts.as_ref().map(|d| &d[n])
    }

    pub fn has_drift(&self) -> bool {
        self.drifts.is_some()
    }

    /// Index of the stored time closest to `t`; errors if none is within
    /// half a stride.
    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        let dt = self.stored_dt();
        let n = (t / dt).round();
        let idx = n as usize;
        if n < 0.0 || idx >= self.times.len() || (t - n * dt).abs() > 0.5 * dt.max(1e-12) {
            return Err(Error::Config(format!("time {t} is not on the stored grid")));
        }
        Ok(idx)
    }

    /// Fractional checkpoint position of `t`, clamped to the stored span.
    fn stored_pos(&self, t: f64) -> (usize, usize, f64) {
        let dt = self.stored_dt();
        let s = (t / dt).clamp(0.0, (self.times.len() - 1) as f64);
        let n0 = (s.floor() as usize).min(self.times.len() - 1);
        let n1 = (n0 + 1).min(self.times.len() - 1);
        (n0, n1, s - n0 as f64)
    }

    /// Linear blend of the two bracketing stored fields.
    pub fn field_at(&self, t: f64) -> GridField {
        let (n0, n1, w) = self.stored_pos(t);
        let mut out = self.fields[n0].clone();
        if n1 != n0 && w != 0.0 {
            out.scale(1.0 - w);
            out.add_scaled(&self.fields[n1], w);
        }
        out
    }

    /// Linear blend of the stored drift fields at time `t`; errors if the
    /// run did not store drifts or `t` lies outside the span.
    pub fn drift_at(&self, t: f64) -> Result<[GridField; 3]> {
        let drifts = self
            .drifts
            .as_ref()
            .ok_or_else(|| Error::Config("trajectory was run without store_drift".into()))?;
        if t < -1e-12 || t > self.times[self.times.len() - 1] + 1e-9 {
            return Err(Error::Config(format!("time {t} outside the stored span")));
        }
        let (n0, n1, w) = self.stored_pos(t);
        let mut out = drifts[n0].clone();
        if n1 != n0 && w != 0.0 {
            for (o, f) in out.iter_mut().zip(&drifts[n1]) {
                o.scale(1.0 - w);
                o.add_scaled(f, w);
            }
        }
        Ok(out)
    }
}

/// Drift field of `traj` at time `t` (linear blend between checkpoints).
pub fn drift_at(traj: &Trajectory, t: f64) -> Result<[GridField; 3]> {
    traj.drift_at(t)
}

/// Solve the nonlinear PDE forward from `u0`.
pub fn run_forward(
    u0: &GridField,
    interaction: &Interaction,
    params: &PdeParams,
) -> Result<Trajectory> {
    let n_steps = params.validate()?;
    if u0.grid() != params.grid {
        return Err(Error::Config("initial field grid does not match parameters".into()));
    }
    let grid = params.grid;
    let peak = u0.linf_norm();
    if peak <= 0.0 || !peak.is_finite() {
        return Err(Error::Config("initial field must be finite and nonzero".into()));
    }
    // The periodic representation is only faithful when the data vanishes
    // at the box faces; refuse clearly unresolvable setups and warn about
    // marginal ones. The check targets the wrap plane `x = -L/2` (the
    // outermost sampled coordinate).
    let edge = 0.5 * grid.length() - 0.49 * grid.h();
    if u0.max_abs_outside(edge) > 1e-12 * peak {
        return Err(Error::Config(format!(
            "initial field does not decay at the box boundary (relative level {:.3e}); \
             enlarge the box",
            u0.max_abs_outside(edge) / peak
        )));
    }
    if u0.max_abs_outside(0.25 * grid.length()) > 1e-12 * peak {
        eprintln!(
            "warning: initial field is above 1e-12 of its peak beyond a quarter of the box; \
             periodic images may contaminate long runs"
        );
    }

    let engine =
        SpectralEngine::new(grid, interaction, params.sigma, params.kappa, params.dt);

    // Project the initial data onto the dealiased band so the whole
    // evolution stays inside it.
    let mut uhat = engine.spectrum(u0);
    engine.dealias(&mut uhat);
    let mut u_real = engine.to_field(uhat.clone());
    let mass0 = u_real.mass();

    let n_stored = n_steps / params.save_every;
    let mut times = Vec::with_capacity(n_stored + 1);
    let mut fields = Vec::with_capacity(n_stored + 1);
    let mut drifts = params.store_drift.then(|| Vec::with_capacity(n_stored + 1));
    times.push(0.0);
    fields.push(u_real.clone());

    let skip_drift = interaction.is_none() || params.kappa == 0.0;
    let zero_drift =
        || [GridField::zeros(grid), GridField::zeros(grid), GridField::zeros(grid)];
    // The drift at the current time doubles as the explicit transport term
    // of the next step, so each drift evaluation is computed exactly once.
    let mut b_cur = (!skip_drift).then(|| engine.drift_fields(&uhat));
    if let Some(d) = &mut drifts {
        d.push(b_cur.clone().unwrap_or_else(zero_drift));
    }

    let h = grid.h();
    let mut positivity_warned = false;
    for n in 0..n_steps {
        if let Some(b) = &b_cur {
            let bmax = b
                .iter()
                .flat_map(|f| f.data().iter())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            if params.dt * bmax / h > 0.5 {
                return Err(Error::Numerical(format!(
                    "transport CFL violated at step {n}: dt * max|b| / h = {:.3} > 0.5; \
                     reduce dt or refine the grid",
                    params.dt * bmax / h
                )));
            }
        }
        u_real = engine.step(&mut uhat, &u_real, b_cur.as_ref());
        if u_real.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("solution lost finiteness at step {n}")));
        }
        let mass = u_real.mass();
        if (mass - mass0).abs() > 1e-10 * mass0.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "mass drifted by {:.3e} at step {n}",
                mass - mass0
            )));
        }
        // Monitor (never clip) negativity beyond spectral-ringing level.
        if !positivity_warned {
            let floor = -1e-8 * u_real.linf_norm();
            if u_real.min_value() < floor {
                eprintln!(
                    "warning: solution dips to {:.3e} at step {n} (beyond ringing tolerance)",
                    u_real.min_value()
                );
                positivity_warned = true;
            }
        }
        b_cur = (!skip_drift).then(|| engine.drift_fields(&uhat));
        if (n + 1) % params.save_every == 0 {
            times.push((n + 1) as f64 * params.dt);
            fields.push(u_real.clone());
            if let Some(d) = &mut drifts {
                d.push(b_cur.clone().unwrap_or_else(zero_drift));
            }
        }
    }

    Ok(Trajectory { params: *params, interaction: interaction.clone(), times, fields, drifts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(grid: Box3) -> PdeParams {
        PdeParams {
            grid,
            sigma: 0.25,
            kappa: 1.0,
            dt: 0.01,
            t_end: 0.05,
            store_drift: false,
            save_every: 1,
        }
    }

    #[test]
    fn strided_storage_matches_the_store_all_checkpoints() {
        let grid = Box3::new(16.0, 16).unwrap();
        let set = crate::kernels::build_kernel_set(0.5, 0.5).unwrap();
        let interaction = Interaction::Mollified(std::sync::Arc::new(set));
        let u0 = GridField::gaussian(grid, 1.0).unwrap();
        let mut dense = small_params(grid);
        dense.store_drift = true;
        let mut thin = dense;
        thin.save_every = 5;
        let a = run_forward(&u0, &interaction, &dense).unwrap();
        let b = run_forward(&u0, &interaction, &thin).unwrap();
        assert_eq!(b.times().len(), 2);
        assert_eq!(a.times()[5], b.times()[1]);
        assert_eq!(a.field(5).data(), b.field(1).data());
        for axis in 0..3 {
            assert_eq!(a.drift(5).unwrap()[axis].data(), b.drift(1).unwrap()[axis].data());
            assert_eq!(a.drift(0).unwrap()[axis].data(), b.drift(0).unwrap()[axis].data());
        }
        // Blending halfway between stored checkpoints averages them.
        let mid = b.drift_at(0.025).unwrap();
        let expect = 0.5 * (b.drift(0).unwrap()[0].data()[100] + b.drift(1).unwrap()[0].data()[100]);
        assert!((mid[0].data()[100] - expect).abs() < 1e-15);
    }

    #[test]
    fn rejects_inconsistent_time_grids() {
        let grid = Box3::new(16.0, 16).unwrap();
        let mut p = small_params(grid);
        p.t_end = 0.013;
        let u0 = GridField::gaussian(grid, 1.0).unwrap();
        assert!(run_forward(&u0, &Interaction::None, &p).is_err());
    }

    #[test]
    fn rejects_non_decaying_initial_data() {
        let grid = Box3::new(16.0, 16).unwrap();
        let p = small_params(grid);
        let u0 = GridField::from_fn(grid, |_| 1.0);
        match run_forward(&u0, &Interaction::None, &p) {
            Err(Error::Config(_)) => {}
            Err(other) => panic!("expected a configuration error, got {other}"),
            Ok(_) => panic!("expected a configuration error"),
        }
    }

    #[test]
    fn heat_flow_conserves_mass_and_spreads() {
        let grid = Box3::new(16.0, 16).unwrap();
        let p = small_params(grid);
        let u0 = GridField::gaussian(grid, 1.0).unwrap();
        let traj = run_forward(&u0, &Interaction::None, &p).unwrap();
        assert_eq!(traj.n_steps(), 5);
        let uf = traj.final_field();
        assert!((uf.mass() - u0.mass()).abs() < 1e-12);
        assert!(uf.linf_norm() < u0.linf_norm());
    }

    #[test]
    fn interacting_run_stores_drift_fields() {
        let grid = Box3::new(16.0, 16).unwrap();
        let mut p = small_params(grid);
        p.store_drift = true;
        let set = crate::kernels::build_kernel_set(0.5, 0.5).unwrap();
        let u0 = GridField::gaussian(grid, 1.0).unwrap();
        let traj =
            run_forward(&u0, &Interaction::Mollified(std::sync::Arc::new(set)), &p).unwrap();
        assert_eq!(traj.times().len(), 6);
        let b0 = traj.drift(0).unwrap();
        // Attractive interaction with kappa > 0 pulls mass inward: the
        // x-drift at a point on the positive x-axis is negative.
        let grid_m = grid.m();
        let probe = grid.flat(grid_m / 2 + 3, grid_m / 2, grid_m / 2);
        assert!(b0[0].data()[probe] < 0.0, "drift {}", b0[0].data()[probe]);
    }
}
