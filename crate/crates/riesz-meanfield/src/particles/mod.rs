//! Interacting particle system and its synchronously coupled mean-field
//! companion.
//!
//! The ensemble evolves `N` particles under Euler–Maruyama:
//!
//! ```text
//! X_i   <- X_i  + dt * (kappa/N) sum_j grad V(X_i - X_j) + sqrt(2 sigma dt) G_i
//! Xbar_i <- Xbar_i + dt * kappa (grad V * ubar)(Xbar_i)  + sqrt(2 sigma dt) G_i
//! ```
//!
//! with the *same* Gaussian increments `G_i` in both lines and identical
//! initial samples, so the coupling distance `max_i |X_i - Xbar_i|` is a
//! pathwise quantity. Positions live on the periodic box of the spectral
//! solver; displacements are minimum-image.

pub mod forces;

use std::sync::Arc;

use crate::fields::{sample_vector, Box3, GridField, Interaction, Trajectory};
use crate::kernels::PairTable;
use crate::rng::NoiseKey;
use crate::{Error, Result};

pub use forces::{displacement, distance, grad_sums, pair_sums, PairSums};

/// Initial law of the i.i.d. particle positions.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDensity {
    /// Centered isotropic Gaussian with the given standard deviation.
    IsotropicGaussian { std: f64 },
    /// Equal-weight mixture of two isotropic Gaussians with centers
    /// `(+-separation/2, 0, 0)`.
    TwoBump { std: f64, separation: f64 },
}

impl InitialDensity {
    /// Render the density on the grid, normalized to unit mass.
    pub fn render(&self, grid: Box3) -> Result<GridField> {
        match *self {
            InitialDensity::IsotropicGaussian { std } => GridField::gaussian(grid, std),
            InitialDensity::TwoBump { std, separation } => {
                if !(std > 0.0) || !(separation >= 0.0) {
                    return Err(Error::Config(
                        "two-bump density needs std > 0 and separation >= 0".into(),
                    ));
                }
                let c = 0.5 * separation;
                let s2 = 2.0 * std * std;
                let mut f = GridField::from_fn(grid, |p| {
                    let yz = p[1] * p[1] + p[2] * p[2];
                    let qa = (p[0] - c) * (p[0] - c) + yz;
                    let qb = (p[0] + c) * (p[0] + c) + yz;
                    (-qa / s2).exp() + (-qb / s2).exp()
                });
                let mass = f.mass();
                if !(mass > 0.0) {
                    return Err(Error::Numerical("two-bump density has vanishing mass".into()));
                }
                f.scale(1.0 / mass);
                Ok(f)
            }
        }
    }

    /// Closed-form sampler consuming one uniform (mixture component) and
    /// three standard normals.
    pub fn sample(&self, uniform: f64, normals: [f64; 3]) -> [f64; 3] {
        match *self {
            InitialDensity::IsotropicGaussian { std } => {
                [std * normals[0], std * normals[1], std * normals[2]]
            }
            InitialDensity::TwoBump { std, separation } => {
                let c = if uniform < 0.5 { separation * 0.5 } else { -separation * 0.5 };
                [c + std * normals[0], std * normals[1], std * normals[2]]
            }
        }
    }
}

/// Configuration of one coupled realization.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n: usize,
    pub beta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub realization: u64,
    pub init: InitialDensity,
}

impl EnsembleConfig {
    /// Mollification width `eta = N^{-beta}`.
    pub fn eta(&self) -> f64 {
        (self.n as f64).powf(-self.beta)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("ensemble needs at least one particle".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) {
            return Err(Error::Config("ensemble needs dt > 0 and t_end >= 0".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config("sigma must be nonnegative".into()));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!(
                "t_end = {} is not an integer number of dt = {} steps",
                self.t_end, self.dt
            )));
        }
        Ok(())
    }

    /// Number of Euler–Maruyama steps.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// State of the coupled pair (particle system, mean-field companions).
pub struct CoupledEnsemble {
    pub x: Vec<[f64; 3]>,
    pub xbar: Vec<[f64; 3]>,
    pub t: f64,
    step: u64,
    key: NoiseKey,
    grid: Box3,
}

fn wrap_point(grid: &Box3, p: [f64; 3]) -> [f64; 3] {
    [grid.wrap(p[0]), grid.wrap(p[1]), grid.wrap(p[2])]
}

/// Draw the i.i.d. initial positions; both components start at the same
/// point. The draw is a pure function of `(seed, realization, i)`.
pub fn init_ensemble(cfg: &EnsembleConfig, grid: Box3) -> Result<CoupledEnsemble> {
    cfg.validate()?;
    let key = NoiseKey::new(cfg.seed, cfg.realization);
    let mut x = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let (u, g) = key.init_draws(i as u64);
        let zeta = wrap_point(&grid, cfg.init.sample(u, g));
        x.push(zeta);
    }
    let xbar = x.clone();
    Ok(CoupledEnsemble { x, xbar, t: 0.0, step: 0, key, grid })
}

/// Mean-field drift at each companion position: trilinear interpolation of
/// the stored drift field `kappa (grad V * ubar)`.
pub fn meanfield_drift(positions: &[[f64; 3]], drift: &[GridField; 3]) -> Vec<[f64; 3]> {
    positions.iter().map(|&p| sample_vector(drift, p)).collect()
}

impl CoupledEnsemble {
    /// One synchronous Euler–Maruyama step for both components.
    ///
    /// `drift` is the mean-field drift field at the current time (already
    /// scaled by `kappa`); `table` provides `grad V` for the pairwise sums.
    pub fn em_step(
        &mut self,
        cfg: &EnsembleConfig,
        table: &PairTable,
        drift: &[GridField; 3],
    ) -> Result<()> {
        let n = cfg.n as f64;
        let scale = cfg.kappa / n;
        let pair = if scale != 0.0 {
            grad_sums(&self.x, table, &self.grid)
        } else {
            vec![[0.0; 3]; self.x.len()]
        };
        let amp = (2.0 * cfg.sigma * cfg.dt).sqrt();
        for i in 0..self.x.len() {
            let g = self.key.normals_step(i as u64, self.step);
            let noise = [amp * g[0], amp * g[1], amp * g[2]];
            let bbar = sample_vector(drift, self.xbar[i]);
            for c in 0..3 {
                self.x[i][c] += cfg.dt * scale * pair[i][c] + noise[c];
                self.xbar[i][c] += cfg.dt * bbar[c] + noise[c];
            }
            self.x[i] = wrap_point(&self.grid, self.x[i]);
            self.xbar[i] = wrap_point(&self.grid, self.xbar[i]);
            for c in 0..3 {
                if !self.x[i][c].is_finite() || !self.xbar[i][c].is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite position for particle {i} at step {}",
                        self.step
                    )));
                }
            }
        }
        self.step += 1;
        self.t = self.step as f64 * cfg.dt;
        Ok(())
    }

    /// Pathwise coupling distance `max_i |X_i - Xbar_i|` (minimum-image).
    pub fn coupling_distance(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.x.len() {
            let d = distance(self.x[i], self.xbar[i], &self.grid);
            if d > worst {
                worst = d;
            }
        }
        worst
    }
}

/// Positions of both components at one stored time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<[f64; 3]>,
    pub xbar: Vec<[f64; 3]>,
}

/// Pathwise coupling summary of one realization.
#[derive(Debug, Clone)]
pub struct CouplingRecord {
    /// Stored checkpoint times (starting at 0).
    pub times: Vec<f64>,
    /// Coupling distance at each checkpoint.
    pub max_dist: Vec<f64>,
    /// Running supremum of the coupling distance up to each checkpoint,
    /// tracked every step.
    pub running_sup: Vec<f64>,
    /// Thresholds `N^{-alpha}` checked against the final running supremum.
    pub alphas: Vec<f64>,
    /// Whether `sup_t max_i |X_i - Xbar_i| > N^{-alpha}` for each alpha.
    pub exceeded: Vec<bool>,
    pub n: usize,
}

enum DriftRef<'a> {
    Borrowed(&'a [GridField; 3]),
    Owned([GridField; 3]),
}

impl DriftRef<'_> {
    fn get(&self) -> &[GridField; 3] {
        match self {
            DriftRef::Borrowed(d) => d,
            DriftRef::Owned(d) => d,
        }
    }
}

fn drift_source<'a>(traj: &'a Trajectory, t: f64) -> Result<DriftRef<'a>> {
    let stride = traj.stored_dt();
    let pos = t / stride;
    let idx = pos.round();
    if (pos - idx).abs() <= 1e-9 * pos.abs().max(1.0)
        && idx >= 0.0
        && (idx as usize) < traj.times().len()
    {
        let d = traj
            .drift(idx as usize)
            .ok_or_else(|| Error::Config("trajectory was run without store_drift".into()))?;
        Ok(DriftRef::Borrowed(d))
    } else {
        Ok(DriftRef::Owned(crate::fields::drift_at(traj, t)?))
    }
}

/// Run one coupled realization against a stored mean-field trajectory.
///
/// The trajectory must carry drift fields spanning `[0, t_end]` with a
/// checkpoint spacing that is an integer multiple of the particle `dt`
/// (drifts between checkpoints are linearly blended in time). Snapshots of
/// both components are stored every `save_every` steps (which must divide
/// the step count), always including `t = 0` and the final time.
pub fn run_coupled(
    cfg: &EnsembleConfig,
    table: &PairTable,
    traj: &Trajectory,
    alphas: &[f64],
    save_every: usize,
) -> Result<(CouplingRecord, Vec<Snapshot>)> {
    cfg.validate()?;
    let steps = cfg.n_steps();
    if save_every == 0 || steps % save_every != 0 {
        return Err(Error::Config(format!(
            "save_every = {save_every} must be positive and divide {steps} steps"
        )));
    }
    if !traj.has_drift() {
        return Err(Error::Config(
            "coupled run needs a trajectory stored with drift fields".into(),
        ));
    }
    let p = traj.params();
    if (p.sigma - cfg.sigma).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "sigma mismatch: particles {} vs trajectory {}",
            cfg.sigma, p.sigma
        )));
    }
    match traj.interaction() {
        Interaction::Mollified(set) => {
            let eta = cfg.eta();
            if (set.eta - eta).abs() > 1e-12 * eta {
                return Err(Error::Config(format!(
                    "mollification mismatch: particles eta = {eta}, trajectory eta = {}",
                    set.eta
                )));
            }
            if (table.kernel_set().eta - eta).abs() > 1e-12 * eta {
                return Err(Error::Config(format!(
                    "mollification mismatch: particles eta = {eta}, pair table eta = {}",
                    table.kernel_set().eta
                )));
            }
            if (p.kappa - cfg.kappa).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "kappa mismatch: particles {} vs trajectory {}",
                    cfg.kappa, p.kappa
                )));
            }
        }
        Interaction::None => {
            if cfg.kappa != 0.0 {
                return Err(Error::Config(
                    "interaction-free trajectory paired with kappa != 0".into(),
                ));
            }
        }
        Interaction::Limit { .. } => {
            return Err(Error::Config(
                "coupled runs pair with the mollified intermediate trajectory, not the limit"
                    .into(),
            ));
        }
    }
    let t_span = *traj.times().last().expect("trajectory has times");
    if cfg.t_end > t_span + 1e-9 {
        return Err(Error::Config(format!(
            "particle horizon {} exceeds trajectory span {}",
            cfg.t_end, t_span
        )));
    }
    let stride = traj.stored_dt();
    let ratio = stride / cfg.dt;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio < 1.0 - 1e-9 {
        return Err(Error::Config(format!(
            "trajectory checkpoint spacing {stride} is not an integer multiple of particle dt {}",
            cfg.dt
        )));
    }

    let grid = traj.params().grid;
    let mut ens = init_ensemble(cfg, grid)?;
    let quarter = 0.25 * grid.length();
    let mut warned = false;

    let n_checkpoints = steps / save_every + 1;
    let mut times = Vec::with_capacity(n_checkpoints);
    let mut max_dist = Vec::with_capacity(n_checkpoints);
    let mut running = Vec::with_capacity(n_checkpoints);
    let mut snaps = Vec::with_capacity(n_checkpoints);
    let mut sup = ens.coupling_distance();
    times.push(0.0);
    max_dist.push(sup);
    running.push(sup);
    snaps.push(Snapshot { t: 0.0, x: ens.x.clone(), xbar: ens.xbar.clone() });

    for step in 0..steps {
        let t_now = step as f64 * cfg.dt;
        let drift = drift_source(traj, t_now)?;
        ens.em_step(cfg, table, drift.get())?;
        let d = ens.coupling_distance();
        if d > sup {
            sup = d;
        }
        if !warned {
            let far = ens
                .x
                .iter()
                .chain(ens.xbar.iter())
                .any(|p| p.iter().any(|&c| c.abs() > quarter));
            if far {
                eprintln!(
                    "warning: particle outside the central quarter of the box at t = {:.4}; \
                     truncation assumption of the periodic embedding is strained",
                    ens.t
                );
                warned = true;
            }
        }
        if (step + 1) % save_every == 0 {
            times.push(ens.t);
            max_dist.push(d);
            running.push(sup);
            snaps.push(Snapshot { t: ens.t, x: ens.x.clone(), xbar: ens.xbar.clone() });
        }
    }

    let n_alpha = cfg.n as f64;
    let exceeded = alphas.iter().map(|&a| sup > n_alpha.powf(-a)).collect();
    let record = CouplingRecord {
        times,
        max_dist,
        running_sup: running,
        alphas: alphas.to_vec(),
        exceeded,
        n: cfg.n,
    };
    Ok((record, snaps))
}

/// Convenience: build the pair table for a config's mollification width.
pub fn pair_table_for(cfg: &EnsembleConfig, lambda: f64) -> Result<PairTable> {
    let set = crate::kernels::build_kernel_set(lambda, cfg.eta())?;
    Ok(PairTable::new(Arc::new(set)))
}
