//! Experiment orchestration: content-addressed run directories, manifests,
//! and the seven runnable experiment kinds.
//!
//! Every run writes into a fresh directory `<out>/<kind>-<hash12>` (twelve
//! hex digits of the canonical configuration hash) containing:
//!
//! * `config.txt` — canonical configuration snapshot,
//! * `samples*.csv` — long-format per-realization rows
//!   (`run_id, realization, t, statistic, value`),
//! * `report.json` — machine-readable aggregates (with the config hash),
//! * `summary.txt` — the regime report plus headline numbers,
//! * `kernels/`, `checkpoints/` — kernel tables and raw field arrays,
//! * `manifest.json` — tool version, hashes, thread count, wall clock.
//!
//! All Monte Carlo loops draw from counter-based per-realization streams and
//! aggregate in realization order, so the emitted CSV bytes are independent
//! of the rayon thread count.

use super::config::{report_text, validate_regime, RegimeSpec};
use super::persist::{
    ensure_new_dir, save_fields, sha256_file, write_samples_csv, SampleRow,
};
use crate::fields::{
    backward_dual, forward_linearized, run_forward, Box3, GridField, Interaction, PdeParams,
    Trajectory,
};
use crate::kernels::{build_kernel_set, PairTable, RadialKernelSet};
use crate::particles::{run_coupled, CouplingRecord, EnsembleConfig};
use crate::rng::{splitmix64, uniform01};
use crate::statistics::{
    clt_target_variance, fluctuation_pairing_fn, normality_report, rate_fit, CheckpointKernels,
    DualConfig, ErrorSample, StatKernels, TestFunction,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// The runnable experiment kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    KernelVerify,
    PdeRun,
    DualRun,
    CoupleRun,
    Lln,
    Rate,
    Clt,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::KernelVerify => "kernel-verify",
            Kind::PdeRun => "pde-run",
            Kind::DualRun => "dual-run",
            Kind::CoupleRun => "couple-run",
            Kind::Lln => "lln",
            Kind::Rate => "rate",
            Kind::Clt => "clt",
        }
    }

    pub const ALL: [Kind; 7] = [
        Kind::KernelVerify,
        Kind::PdeRun,
        Kind::DualRun,
        Kind::CoupleRun,
        Kind::Lln,
        Kind::Rate,
        Kind::Clt,
    ];
}

/// Name/digest pair recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub name: String,
    pub sha256: String,
}

/// Reproducibility record written alongside every run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub kind: String,
    pub run_id: String,
    pub tool_version: String,
    pub config_hash: String,
    /// Canonical configuration snapshot (embedded verbatim).
    pub config: String,
    /// Digests of input files (the originating config file).
    pub input_files: Vec<FileHash>,
    /// Digests of the kernel tables built for this run.
    pub kernel_tables: Vec<FileHash>,
    /// Rayon thread count actually used.
    pub threads: usize,
    /// True when the theorem gates failed and the run proceeded anyway.
    pub forced: bool,
    pub wall_clock_seconds: f64,
    /// Files written by this run, relative to the run directory.
    pub outputs: Vec<String>,
}

/// How to launch a run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub spec: RegimeSpec,
    pub out_root: PathBuf,
    /// Rayon pool size; `None` uses one thread per available core.
    pub threads: Option<usize>,
    /// Proceed despite failed theorem gates (outputs are labeled).
    pub force: bool,
    /// Originating config file `(name, sha256)`, recorded in the manifest.
    pub input_file: Option<(String, String)>,
}

/// Result handed back to the caller.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub run_id: String,
    pub report: serde_json::Value,
    pub summary: String,
}

/// What each kind-specific runner produces.
struct KindArtifacts {
    outputs: Vec<String>,
    kernel_tables: Vec<FileHash>,
    report: serde_json::Value,
    summary_lines: Vec<String>,
}

/// Builds kernel tables on demand, saving each distinct width once.
struct KernelCache<'a> {
    spec: &'a RegimeSpec,
    dir: &'a Path,
    map: BTreeMap<u64, Arc<RadialKernelSet>>,
    outputs: Vec<String>,
    tables: Vec<FileHash>,
}

impl<'a> KernelCache<'a> {
    fn new(spec: &'a RegimeSpec, dir: &'a Path) -> Self {
        Self { spec, dir, map: BTreeMap::new(), outputs: Vec::new(), tables: Vec::new() }
    }

    fn get(&mut self, eta: f64) -> Result<Arc<RadialKernelSet>> {
        if let Some(set) = self.map.get(&eta.to_bits()) {
            return Ok(set.clone());
        }
        let set = Arc::new(build_kernel_set(self.spec.lambda, eta)?);
        let kdir = self.dir.join("kernels");
        fs::create_dir_all(&kdir)?;
        let name = format!("kernels/kernel-eta-{eta}.txt");
        let path = self.dir.join(&name);
        set.save(&path)?;
        let digest = sha256_file(&path)?;
        self.outputs.push(name.clone());
        self.tables.push(FileHash { name, sha256: digest });
        self.map.insert(eta.to_bits(), set.clone());
        Ok(set)
    }
}

/// Validate the regime, create the content-addressed run directory, execute
/// the experiment inside a rayon pool of the requested size, and write the
/// CSV/JSON/manifest artifacts.
pub fn run_experiment(kind: Kind, ctx: &RunContext) -> Result<RunOutcome> {
    let started = Instant::now();
    let spec = &ctx.spec;
    let gates = validate_regime(spec)?;
    let forced = !gates.pass;
    if forced && !ctx.force {
        return Err(Error::Gate(format!(
            "theorem gates failed for this regime (pass --force for a labeled exploratory run)\n{}",
            report_text(spec, &gates)
        )));
    }

    let hash = spec.config_hash();
    let run_id = format!("{}-{}", kind.as_str(), &hash[..12]);
    let dir = ctx.out_root.join(&run_id);
    ensure_new_dir(&dir)?;
    fs::write(dir.join("config.txt"), spec.canonical())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let arts = pool.install(|| dispatch(kind, spec, &dir, &run_id, &hash))?;

    let report = serde_json::json!({
        "schema_version": 1,
        "kind": kind.as_str(),
        "run_id": run_id,
        "config_hash": hash,
        "forced": forced,
        "gates": gates,
        "results": arts.report,
    });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;

    let mut summary = String::new();
    let _ = writeln!(summary, "{run_id}");
    if forced {
        let _ = writeln!(summary, "FORCED exploratory run: theorem gates bypassed");
    }
    summary.push_str(&report_text(spec, &gates));
    for line in &arts.summary_lines {
        let _ = writeln!(summary, "{line}");
    }
    fs::write(dir.join("summary.txt"), &summary)?;

    let mut outputs = vec!["config.txt".to_string(), "report.json".to_string(), "summary.txt".to_string()];
    outputs.extend(arts.outputs);
    let manifest = ExperimentManifest {
        schema_version: 1,
        kind: kind.as_str().to_string(),
        run_id: run_id.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash.clone(),
        config: spec.canonical(),
        input_files: ctx
            .input_file
            .iter()
            .map(|(n, h)| FileHash { name: n.clone(), sha256: h.clone() })
            .collect(),
        kernel_tables: arts.kernel_tables,
        threads,
        forced,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    Ok(RunOutcome { dir, run_id, report, summary })
}

fn dispatch(
    kind: Kind,
    spec: &RegimeSpec,
    dir: &Path,
    run_id: &str,
    hash: &str,
) -> Result<KindArtifacts> {
    match kind {
        Kind::KernelVerify => run_kernel_verify(spec, dir, run_id),
        Kind::PdeRun => run_pde(spec, dir, run_id, hash),
        Kind::DualRun => run_dual(spec, dir, run_id, hash),
        Kind::CoupleRun => particle_sweep(
            spec,
            dir,
            run_id,
            SweepOptions { errors: false, lln: false, coupling: true },
        ),
        Kind::Lln => particle_sweep(
            spec,
            dir,
            run_id,
            SweepOptions { errors: false, lln: true, coupling: false },
        ),
        Kind::Rate => particle_sweep(
            spec,
            dir,
            run_id,
            SweepOptions { errors: true, lln: true, coupling: true },
        ),
        Kind::Clt => run_clt(spec, dir, run_id),
    }
}

fn grid_of(spec: &RegimeSpec) -> Result<Box3> {
    Box3::new(spec.box_length, spec.box_m)
}

fn ensemble_cfg(spec: &RegimeSpec, n: usize, realization: u64) -> EnsembleConfig {
    EnsembleConfig {
        n,
        beta: spec.beta,
        sigma: spec.sigma,
        kappa: spec.kappa,
        dt: spec.dt,
        t_end: spec.t_end,
        seed: spec.seed,
        realization,
        init: spec.u0.clone(),
    }
}

/// Mean-field trajectory driving the coupled particle runs: stored every
/// step with drift fields, so the intermediate component sees the exact
/// discrete drift.
fn intermediate_traj(
    spec: &RegimeSpec,
    grid: Box3,
    u0: &GridField,
    set: &Arc<RadialKernelSet>,
) -> Result<Trajectory> {
    let interaction = if spec.kappa == 0.0 {
        Interaction::None
    } else {
        Interaction::Mollified(set.clone())
    };
    run_forward(
        u0,
        &interaction,
        &PdeParams {
            grid,
            sigma: spec.sigma,
            kappa: spec.kappa,
            dt: spec.dt,
            t_end: spec.t_end,
            store_drift: true,
            save_every: 1,
        },
    )
}

// ---------------------------------------------------------------------------
// kernel-verify
// ---------------------------------------------------------------------------

fn run_kernel_verify(spec: &RegimeSpec, dir: &Path, run_id: &str) -> Result<KindArtifacts> {
    let mut cache = KernelCache::new(spec, dir);
    let mut rows: Vec<SampleRow> = Vec::new();

    // Far-field agreement of the factorized mollified kernel with the pure
    // power law: V^eta(r) / r^{-lambda} - 1 for r well beyond the
    // mollification scale, plus the exact L2 factorization identity
    // V^eta(0) = ||Z^eta||_2^2.
    let mut factor = Vec::new();
    for &eta in &spec.eta_list {
        let set = cache.get(eta)?;
        let r_lo = (15.0 * eta).max(0.05);
        let r_hi: f64 = 20.0;
        if r_lo >= r_hi {
            return Err(Error::Config(format!(
                "eta = {eta} leaves no far-field window below r = {r_hi}"
            )));
        }
        let np = 200usize;
        let mut max_dev = 0.0f64;
        for k in 0..=np {
            let r = r_lo * (r_hi / r_lo).powf(k as f64 / np as f64);
            let dev = set.eval_v(r) / r.powf(-spec.lambda) - 1.0;
            rows.push(SampleRow::new(0, r, format!("farfield_rel_dev:eta={eta}"), dev));
            max_dev = max_dev.max(dev.abs());
        }
        let ident = (set.z_l2().powi(2) / set.eval_v(0.0) - 1.0).abs();
        rows.push(SampleRow::new(0, 0.0, format!("l2_identity_rel_dev:eta={eta}"), ident));
        factor.push(serde_json::json!({
            "eta": eta,
            "farfield_max_abs_dev": max_dev,
            "l2_identity_rel_dev": ident,
        }));
    }

    // Scaling of the kernel extremes with N (through eta = N^{-beta}).
    let mut ln_n = Vec::new();
    let mut v0s = Vec::new();
    let mut grads = Vec::new();
    let mut laps = Vec::new();
    let mut zl2s = Vec::new();
    for &n in &spec.n_list {
        let eta = spec.eta_of(n);
        let set = cache.get(eta)?;
        let v0 = set.eval_v(0.0);
        let lap0 = set.eval_lapv(0.0).abs();
        let mut grad_sup = 0.0f64;
        for k in 1..=600 {
            let r = 10.0 * eta * k as f64 / 600.0;
            grad_sup = grad_sup.max(set.eval_dv(r).abs());
        }
        let z = set.z_l2();
        ln_n.push((n as f64).ln());
        v0s.push(v0.ln());
        grads.push(grad_sup.ln());
        laps.push(lap0.ln());
        zl2s.push(z.ln());
        let nf = n as f64;
        rows.push(SampleRow::new(0, nf, "kernel_v_zero", v0));
        rows.push(SampleRow::new(0, nf, "kernel_grad_sup", grad_sup));
        rows.push(SampleRow::new(0, nf, "kernel_lap_zero_abs", lap0));
        rows.push(SampleRow::new(0, nf, "kernel_z_l2", z));
    }
    let scaling = if spec.n_list.len() >= 2 {
        let (s_v0, _) = crate::numerics::ols_slope(&ln_n, &v0s);
        let (s_gr, _) = crate::numerics::ols_slope(&ln_n, &grads);
        let (s_lp, _) = crate::numerics::ols_slope(&ln_n, &laps);
        let (s_z, _) = crate::numerics::ols_slope(&ln_n, &zl2s);
        let b = spec.beta;
        let l = spec.lambda;
        let entry = |name: &str, slope: f64, expected: f64| {
            serde_json::json!({
                "statistic": name,
                "slope": slope,
                "expected": expected,
                "within_10pct": (slope - expected).abs() <= 0.1 * expected.abs(),
            })
        };
        vec![
            entry("kernel_v_zero", s_v0, b * l),
            entry("kernel_grad_sup", s_gr, b * (l + 1.0)),
            entry("kernel_lap_zero_abs", s_lp, b * (l + 2.0)),
            entry("kernel_z_l2", s_z, b * l / 2.0),
        ]
    } else {
        Vec::new()
    };

    let csv_name = "samples.csv";
    write_samples_csv(&dir.join(csv_name), run_id, &rows)?;
    let mut outputs = vec![csv_name.to_string()];
    outputs.extend(cache.outputs.clone());

    let max_far = factor
        .iter()
        .map(|f| f["farfield_max_abs_dev"].as_f64().unwrap_or(f64::NAN))
        .fold(0.0f64, f64::max);
    let summary_lines = vec![
        format!("kernel-verify: max far-field deviation {max_far:.3e} over {} widths", spec.eta_list.len()),
        format!("kernel-verify: {} scaling statistics fitted", scaling.len()),
    ];
    Ok(KindArtifacts {
        outputs,
        kernel_tables: cache.tables,
        report: serde_json::json!({ "factorization": factor, "scaling": scaling }),
        summary_lines,
    })
}

// ---------------------------------------------------------------------------
// pde-run
// ---------------------------------------------------------------------------

fn run_pde(spec: &RegimeSpec, dir: &Path, run_id: &str, hash: &str) -> Result<KindArtifacts> {
    let grid = grid_of(spec)?;
    let u0 = spec.u0.render(grid)?;
    let params = PdeParams {
        grid,
        sigma: spec.sigma,
        kappa: spec.kappa,
        dt: spec.dt,
        t_end: spec.t_end,
        store_drift: false,
        save_every: spec.save_every,
    };
    let limit = run_forward(&u0, &Interaction::Limit { lambda: spec.lambda }, &params)?;

    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let stored: Vec<&GridField> = (0..limit.times().len()).map(|k| limit.field(k)).collect();
    let mut outputs: Vec<String> = save_fields(&ckpt_dir, "limit", grid, limit.times(), &stored, hash)?
        .into_iter()
        .map(|n| format!("checkpoints/{n}"))
        .collect();

    let mut cache = KernelCache::new(spec, dir);
    let mut rows: Vec<SampleRow> = Vec::new();
    let mut sups = Vec::new();
    for &eta in &spec.eta_list {
        let set = cache.get(eta)?;
        let ub = run_forward(&u0, &Interaction::Mollified(set.clone()), &params)?;
        let mut sup_l1 = 0.0f64;
        let mut sup_linf = 0.0f64;
        for (k, &t) in limit.times().iter().enumerate() {
            let mut diff = ub.field(k).clone();
            diff.add_scaled(limit.field(k), -1.0);
            let l1 = diff.lp_norm(1.0);
            let linf = diff.linf_norm();
            sup_l1 = sup_l1.max(l1);
            sup_linf = sup_linf.max(linf);
            rows.push(SampleRow::new(0, t, format!("pde_l1_err:eta={eta}"), l1));
            rows.push(SampleRow::new(0, t, format!("pde_linf_err:eta={eta}"), linf));
        }
        let names = save_fields(
            &ckpt_dir,
            &format!("ubar-eta-{eta}"),
            grid,
            &[spec.t_end],
            &[ub.final_field()],
            hash,
        )?;
        outputs.extend(names.into_iter().map(|n| format!("checkpoints/{n}")));
        sups.push((eta, sup_l1, sup_linf));
    }

    // Convergence order in eta of the sup-in-time L1-cap-Linf error.
    let ln_eta: Vec<f64> = sups.iter().map(|&(e, _, _)| e.ln()).collect();
    let ln_err: Vec<f64> = sups.iter().map(|&(_, l1, li)| l1.max(li).ln()).collect();
    let slope = if sups.len() >= 2 { crate::numerics::ols_slope(&ln_eta, &ln_err).0 } else { f64::NAN };

    let csv_name = "samples.csv";
    write_samples_csv(&dir.join(csv_name), run_id, &rows)?;
    outputs.push(csv_name.to_string());
    outputs.extend(cache.outputs.clone());

    let per_eta: Vec<serde_json::Value> = sups
        .iter()
        .map(|&(eta, l1, li)| {
            serde_json::json!({ "eta": eta, "sup_l1": l1, "sup_linf": li, "sup_norm": l1.max(li) })
        })
        .collect();
    let summary_lines = vec![format!(
        "pde-run: convergence slope {slope:.3} in eta over {} widths (expect about 1)",
        sups.len()
    )];
    Ok(KindArtifacts {
        outputs,
        kernel_tables: cache.tables,
        report: serde_json::json!({ "convergence": per_eta, "slope_in_eta": slope }),
        summary_lines,
    })
}

// ---------------------------------------------------------------------------
// dual-run
// ---------------------------------------------------------------------------

/// Deterministic smooth random field: a few Gaussian bumps with seeded
/// centers, widths, and signs.
fn random_smooth_field(grid: Box3, seed: u64) -> GridField {
    let mut state = seed ^ 0xa5a5_5a5a_dead_beef;
    let l6 = grid.length() / 6.0;
    let mut bumps = Vec::new();
    for _ in 0..3 {
        let cx = (2.0 * uniform01(splitmix64(&mut state)) - 1.0) * l6;
        let cy = (2.0 * uniform01(splitmix64(&mut state)) - 1.0) * l6;
        let cz = (2.0 * uniform01(splitmix64(&mut state)) - 1.0) * l6;
        let w = 0.5 + 0.5 * uniform01(splitmix64(&mut state));
        let a = 2.0 * uniform01(splitmix64(&mut state)) - 1.0;
        bumps.push(([cx, cy, cz], w, a));
    }
    GridField::from_fn(grid, move |p| {
        let mut v = 0.0;
        for &(c, w, a) in &bumps {
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
            v += a * (-d2 / (2.0 * w * w)).exp();
        }
        v
    })
}

fn run_dual(spec: &RegimeSpec, dir: &Path, run_id: &str, hash: &str) -> Result<KindArtifacts> {
    let grid = grid_of(spec)?;
    let u0 = spec.u0.render(grid)?;
    let params = PdeParams {
        grid,
        sigma: spec.sigma,
        kappa: spec.kappa,
        dt: spec.dt,
        t_end: spec.t_end,
        store_drift: false,
        save_every: 1,
    };
    let traj = run_forward(&u0, &Interaction::Limit { lambda: spec.lambda }, &params)?;
    let end = traj.index_of_time(spec.t_end)?;

    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;

    let mut rows: Vec<SampleRow> = Vec::new();
    let mut outputs: Vec<String> = Vec::new();
    let mut max_rel = 0.0f64;
    let mut per_phi = Vec::new();
    for (id, phi) in TestFunction::standard_set() {
        let terminal = phi.render(grid);
        let duals = backward_dual(&traj, &terminal, end)?;
        let names = save_fields(
            &ckpt_dir,
            &format!("dual-{id}"),
            grid,
            &[0.0],
            &[&duals[0]],
            hash,
        )?;
        outputs.extend(names.into_iter().map(|n| format!("checkpoints/{n}")));

        // Duality pairing: <f(t_end), phi> computed by the forward
        // linearized flow must equal <f0, T(0)> from the backward dual.
        let mut phi_max = 0.0f64;
        for case in 0..5u64 {
            let f0 = random_smooth_field(grid, spec.seed.wrapping_add(case));
            let fwd = forward_linearized(&traj, &f0, 0, end)?;
            let lhs = fwd.inner(&terminal);
            let rhs = f0.inner(&duals[0]);
            let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
            rows.push(SampleRow::new(case, spec.t_end, format!("duality_rel_err:phi={id}"), rel));
            phi_max = phi_max.max(rel);
        }
        max_rel = max_rel.max(phi_max);
        per_phi.push(serde_json::json!({ "phi": id, "max_rel_err": phi_max }));
    }

    let csv_name = "samples.csv";
    write_samples_csv(&dir.join(csv_name), run_id, &rows)?;
    outputs.push(csv_name.to_string());

    let summary_lines =
        vec![format!("dual-run: max adjoint-duality relative error {max_rel:.3e} over 20 cases")];
    Ok(KindArtifacts {
        outputs,
        kernel_tables: Vec::new(),
        report: serde_json::json!({ "duality": per_phi, "max_rel_err": max_rel }),
        summary_lines,
    })
}

// ---------------------------------------------------------------------------
// couple-run / lln / rate (one shared sweep skeleton)
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct SweepOptions {
    errors: bool,
    lln: bool,
    coupling: bool,
}

struct RealizationOut {
    rows: Vec<SampleRow>,
    rate_stat: Option<f64>,
    floor_violation: bool,
    lln_sup_vec: f64,
    lln_sup_scalar: f64,
    coupling: CouplingRecord,
}

fn particle_sweep(
    spec: &RegimeSpec,
    dir: &Path,
    run_id: &str,
    opts: SweepOptions,
) -> Result<KindArtifacts> {
    let grid = grid_of(spec)?;
    let u0 = spec.u0.render(grid)?;
    let steps = spec.n_steps();
    let mut cache = KernelCache::new(spec, dir);
    let mut outputs: Vec<String> = Vec::new();

    let mut rate_samples: Vec<Vec<f64>> = Vec::new();
    let mut floor_total = 0usize;
    let mut coupling_agg: Vec<serde_json::Value> = Vec::new();
    let mut lln_agg: Vec<serde_json::Value> = Vec::new();
    let mut mean_sup: Vec<(usize, f64)> = Vec::new();

    for &n in &spec.n_list {
        let eta = spec.eta_of(n);
        let set = cache.get(eta)?;
        let table = PairTable::new(set.clone());
        let traj = intermediate_traj(spec, grid, &u0, &set)?;

        // Checkpoint kernels are shared by every realization at this N.
        let ckpts: Option<Vec<CheckpointKernels>> = if opts.errors || opts.lln {
            let sk = StatKernels::new(grid, set.clone())?;
            Some(
                (0..=steps)
                    .step_by(spec.save_every)
                    .map(|s| sk.checkpoint(traj.field(s)))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };

        let alphas: &[f64] = if opts.coupling { &spec.alpha_list } else { &[] };
        let per: Vec<RealizationOut> = (0..spec.realizations as u64)
            .into_par_iter()
            .map(|r| -> Result<RealizationOut> {
                let cfg = ensemble_cfg(spec, n, r);
                let (rec, snaps) = run_coupled(&cfg, &table, &traj, alphas, spec.save_every)?;
                let mut rows: Vec<SampleRow> = Vec::new();
                let mut rate_stat = None;
                let mut floor_violation = false;
                let mut lln_sup_vec = 0.0f64;
                let mut lln_sup_scalar = 0.0f64;

                if let Some(cks) = &ckpts {
                    let mut times = Vec::with_capacity(snaps.len());
                    let mut l2s = Vec::with_capacity(snaps.len());
                    let mut h1s = Vec::with_capacity(snaps.len());
                    for (k, snap) in snaps.iter().enumerate() {
                        if opts.errors {
                            let (l2, h1) = cks[k].error_terms(&snap.x, &table)?;
                            rows.push(SampleRow::new(r, snap.t, "l2_err_sq", l2));
                            rows.push(SampleRow::new(r, snap.t, "h1_err_sq", h1));
                            times.push(snap.t);
                            l2s.push(l2);
                            h1s.push(h1);
                        }
                        if opts.lln {
                            let dev = cks[k].lln_deviations(&snap.xbar, &table)?;
                            rows.push(SampleRow::new(r, snap.t, "lln_vec_max", dev.vec_max));
                            rows.push(SampleRow::new(r, snap.t, "lln_scalar_max", dev.scalar_max));
                            lln_sup_vec = lln_sup_vec.max(dev.vec_max);
                            lln_sup_scalar = lln_sup_scalar.max(dev.scalar_max);
                        }
                    }
                    if opts.errors {
                        let es = ErrorSample::new(r, times, l2s, h1s)?;
                        rows.push(SampleRow::new(r, spec.t_end, "sup_l2_err_sq", es.sup_l2));
                        rows.push(SampleRow::new(r, spec.t_end, "h1_time_integral", es.h1_integral));
                        let stat = es.rate_statistic(spec.sigma);
                        rows.push(SampleRow::new(r, spec.t_end, "rate_statistic", stat));
                        rows.push(SampleRow::new(
                            r,
                            spec.t_end,
                            "l2_floor_violation",
                            if es.floor_violation { 1.0 } else { 0.0 },
                        ));
                        rate_stat = Some(stat);
                        floor_violation = es.floor_violation;
                    }
                    if opts.lln {
                        rows.push(SampleRow::new(r, spec.t_end, "lln_vec_sup", lln_sup_vec));
                        rows.push(SampleRow::new(r, spec.t_end, "lln_scalar_sup", lln_sup_scalar));
                        for &th in &spec.theta_list {
                            let thr = (n as f64).powf(-th);
                            rows.push(SampleRow::new(
                                r,
                                spec.t_end,
                                format!("lln_vec_exceeded_theta={th}"),
                                if lln_sup_vec > thr { 1.0 } else { 0.0 },
                            ));
                            rows.push(SampleRow::new(
                                r,
                                spec.t_end,
                                format!("lln_scalar_exceeded_theta={th}"),
                                if lln_sup_scalar > thr { 1.0 } else { 0.0 },
                            ));
                        }
                    }
                }

                if opts.coupling {
                    for (k, &t) in rec.times.iter().enumerate() {
                        rows.push(SampleRow::new(r, t, "coupling_max_dist", rec.max_dist[k]));
                        rows.push(SampleRow::new(r, t, "coupling_running_sup", rec.running_sup[k]));
                    }
                    for (j, &a) in rec.alphas.iter().enumerate() {
                        rows.push(SampleRow::new(
                            r,
                            spec.t_end,
                            format!("coupling_exceeded_alpha={a}"),
                            if rec.exceeded[j] { 1.0 } else { 0.0 },
                        ));
                    }
                }

                Ok(RealizationOut {
                    rows,
                    rate_stat,
                    floor_violation,
                    lln_sup_vec,
                    lln_sup_scalar,
                    coupling: rec,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let rows_n: Vec<SampleRow> = per.iter().flat_map(|p| p.rows.iter().cloned()).collect();
        let csv_name = format!("samples-n{n}.csv");
        write_samples_csv(&dir.join(&csv_name), run_id, &rows_n)?;
        outputs.push(csv_name);

        let rf = spec.realizations as f64;
        if opts.errors {
            let stats: Vec<f64> = per.iter().map(|p| p.rate_stat.unwrap_or(f64::NAN)).collect();
            let mean = stats.iter().sum::<f64>() / rf;
            mean_sup.push((n, mean));
            floor_total += per.iter().filter(|p| p.floor_violation).count();
            rate_samples.push(stats);
        }
        if opts.coupling {
            for (j, &a) in spec.alpha_list.iter().enumerate() {
                let p =
                    per.iter().filter(|o| o.coupling.exceeded.get(j).copied().unwrap_or(false)).count()
                        as f64
                        / rf;
                coupling_agg.push(serde_json::json!({ "n": n, "alpha": a, "p_exceed": p }));
            }
        }
        if opts.lln {
            for &th in &spec.theta_list {
                let thr = (n as f64).powf(-th);
                let pv = per.iter().filter(|o| o.lln_sup_vec > thr).count() as f64 / rf;
                let ps = per.iter().filter(|o| o.lln_sup_scalar > thr).count() as f64 / rf;
                lln_agg.push(serde_json::json!({
                    "n": n, "theta": th, "p_vec_exceed": pv, "p_scalar_exceed": ps,
                }));
            }
        }
    }

    let mut report = serde_json::Map::new();
    let mut summary_lines: Vec<String> = Vec::new();
    if opts.errors {
        let fit = rate_fit(&spec.n_list, &rate_samples, 1000, spec.seed)?;
        summary_lines.push(format!(
            "rate: slope {:.4} (95% CI [{:.4}, {:.4}], one-sided upper {:.4}) over {} particle counts",
            fit.slope, fit.ci_lower, fit.ci_upper, fit.upper95, spec.n_list.len()
        ));
        if floor_total > 0 {
            summary_lines.push(format!("rate: {floor_total} realizations hit the l2 cancellation floor"));
        }
        report.insert("fit".into(), serde_json::to_value(&fit)?);
        report.insert(
            "per_n_mean".into(),
            serde_json::json!(mean_sup
                .iter()
                .map(|&(n, m)| serde_json::json!({ "n": n, "mean_rate_statistic": m }))
                .collect::<Vec<_>>()),
        );
        report.insert("floor_violations".into(), serde_json::json!(floor_total));
    }
    if opts.coupling {
        for &a in &spec.alpha_list {
            let ps: Vec<f64> = coupling_agg
                .iter()
                .filter(|v| v["alpha"].as_f64() == Some(a))
                .map(|v| v["p_exceed"].as_f64().unwrap_or(f64::NAN))
                .collect();
            let mono = ps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            summary_lines.push(format!(
                "coupling: alpha={a}: exceedance probabilities {ps:?} (non-increasing: {mono})"
            ));
        }
        report.insert("coupling".into(), serde_json::Value::Array(coupling_agg));
    }
    if opts.lln {
        for &th in &spec.theta_list {
            let ps: Vec<f64> = lln_agg
                .iter()
                .filter(|v| v["theta"].as_f64() == Some(th))
                .map(|v| v["p_vec_exceed"].as_f64().unwrap_or(f64::NAN))
                .collect();
            let mono = ps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            summary_lines.push(format!(
                "lln: theta={th}: drift-deviation exceedance {ps:?} (non-increasing: {mono})"
            ));
        }
        report.insert("lln".into(), serde_json::Value::Array(lln_agg));
    }

    outputs.extend(cache.outputs.clone());
    Ok(KindArtifacts {
        outputs,
        kernel_tables: cache.tables,
        report: serde_json::Value::Object(report),
        summary_lines,
    })
}

// ---------------------------------------------------------------------------
// clt
// ---------------------------------------------------------------------------

fn run_clt(spec: &RegimeSpec, dir: &Path, run_id: &str) -> Result<KindArtifacts> {
    if spec.realizations < 100 {
        return Err(Error::Config(format!(
            "clt needs at least 100 realizations for the normality report, got {}",
            spec.realizations
        )));
    }
    let grid = grid_of(spec)?;
    let u0 = spec.u0.render(grid)?;
    let steps = spec.n_steps();
    let phis = TestFunction::standard_set();

    // Fluctuation variance targets from the backward dual of the linearized
    // limit equation, at t = 0 (static) and t = t_end.
    let limit_params = PdeParams {
        grid,
        sigma: spec.sigma,
        kappa: spec.kappa,
        dt: spec.dt,
        t_end: spec.t_end,
        store_drift: false,
        save_every: 1,
    };
    let dual_cfg = DualConfig::default();
    let mut targets0 = Vec::with_capacity(phis.len());
    let mut targets_end = Vec::with_capacity(phis.len());
    {
        let limit = run_forward(&u0, &Interaction::Limit { lambda: spec.lambda }, &limit_params)?;
        for (_, phi) in &phis {
            targets0.push(clt_target_variance(phi, 0.0, &limit, &dual_cfg)?);
            targets_end.push(clt_target_variance(phi, spec.t_end, &limit, &dual_cfg)?);
        }
    }

    // Box-truncation sensitivity: recompute the t_end targets on a box of
    // twice the side length at the same resolution.
    let grid2 = Box3::new(2.0 * spec.box_length, 2 * spec.box_m)?;
    let mut stride2 = 1usize;
    for s in (1..=5usize).rev() {
        if steps % s == 0 {
            stride2 = s;
            break;
        }
    }
    let mut targets_end_2l = Vec::with_capacity(phis.len());
    {
        let u02 = spec.u0.render(grid2)?;
        let params2 = PdeParams { grid: grid2, ..limit_params };
        let limit2 = run_forward(&u02, &Interaction::Limit { lambda: spec.lambda }, &params2)?;
        let cfg2 = DualConfig { time_stride: stride2 };
        for (_, phi) in &phis {
            targets_end_2l.push(clt_target_variance(phi, spec.t_end, &limit2, &cfg2)?);
        }
    }

    let targets_json: Vec<serde_json::Value> = phis
        .iter()
        .enumerate()
        .map(|(j, (id, _))| {
            let sens = (targets_end_2l[j] - targets_end[j]).abs() / targets_end[j].abs().max(1e-300);
            serde_json::json!({
                "phi": id,
                "target_t0": targets0[j],
                "target_t_end": targets_end[j],
                "target_t_end_double_box": targets_end_2l[j],
                "box_sensitivity_rel": sens,
            })
        })
        .collect();

    let mut cache = KernelCache::new(spec, dir);
    let mut outputs: Vec<String> = Vec::new();
    let mut normality: Vec<serde_json::Value> = Vec::new();
    let mut summary_lines: Vec<String> = Vec::new();
    for (j, (id, _)) in phis.iter().enumerate() {
        summary_lines.push(format!(
            "clt: phi={id}: target var {:.5} (t=0) / {:.5} (t={}), double-box shift {:.2e}",
            targets0[j],
            targets_end[j],
            spec.t_end,
            (targets_end_2l[j] - targets_end[j]).abs() / targets_end[j].abs().max(1e-300),
        ));
    }

    for &n in &spec.n_list {
        let eta = spec.eta_of(n);
        let set = cache.get(eta)?;
        let table = PairTable::new(set.clone());
        let traj = intermediate_traj(spec, grid, &u0, &set)?;
        let ubar0 = traj.field(0);
        let ubar_end = traj.final_field();
        let phi_grids: Vec<GridField> = phis.iter().map(|(_, p)| p.render(grid)).collect();

        let per: Vec<(Vec<SampleRow>, Vec<f64>, Vec<f64>)> = (0..spec.realizations as u64)
            .into_par_iter()
            .map(|r| -> Result<(Vec<SampleRow>, Vec<f64>, Vec<f64>)> {
                let cfg = ensemble_cfg(spec, n, r);
                let (_, snaps) = run_coupled(&cfg, &table, &traj, &[], steps)?;
                let x0 = &snaps[0].x;
                let xt = &snaps[snaps.len() - 1].x;
                let mut rows = Vec::with_capacity(2 * phis.len());
                let mut v0s = Vec::with_capacity(phis.len());
                let mut vts = Vec::with_capacity(phis.len());
                for (j, (id, phi)) in phis.iter().enumerate() {
                    let v0 = fluctuation_pairing_fn(x0, ubar0, |p| phi.value(p), &phi_grids[j]);
                    let vt =
                        fluctuation_pairing_fn(xt, ubar_end, |p| phi.value(p), &phi_grids[j]);
                    rows.push(SampleRow::new(r, 0.0, format!("fluct:{id}"), v0));
                    rows.push(SampleRow::new(r, spec.t_end, format!("fluct:{id}"), vt));
                    v0s.push(v0);
                    vts.push(vt);
                }
                Ok((rows, v0s, vts))
            })
            .collect::<Result<Vec<_>>>()?;

        let rows_n: Vec<SampleRow> = per.iter().flat_map(|p| p.0.iter().cloned()).collect();
        let csv_name = format!("samples-n{n}.csv");
        write_samples_csv(&dir.join(&csv_name), run_id, &rows_n)?;
        outputs.push(csv_name);

        for (j, (id, _)) in phis.iter().enumerate() {
            for (t, target, pick) in [
                (0.0, targets0[j], 1usize),
                (spec.t_end, targets_end[j], 2usize),
            ] {
                let samples: Vec<f64> = per
                    .iter()
                    .map(|p| if pick == 1 { p.1[j] } else { p.2[j] })
                    .collect();
                let rep = normality_report(&samples, target)?;
                let ks_ok = rep.ks_p > 0.01;
                let cf_ok = rep.cf_distance < 0.15;
                summary_lines.push(format!(
                    "clt: N={n} phi={id} t={t}: var {:.5} vs target {target:.5} (in 99% CI: {}), KS p {:.4}, CF dist {:.4}",
                    rep.variance, rep.var_in_ci, rep.ks_p, rep.cf_distance
                ));
                normality.push(serde_json::json!({
                    "n": n,
                    "phi": id,
                    "t": t,
                    "target_variance": target,
                    "report": serde_json::to_value(&rep)?,
                    "ks_ok": ks_ok,
                    "cf_ok": cf_ok,
                }));
            }
        }
    }

    outputs.extend(cache.outputs.clone());
    Ok(KindArtifacts {
        outputs,
        kernel_tables: cache.tables,
        report: serde_json::json!({
            "targets": targets_json,
            "dual_integrand_stride_double_box": stride2,
            "normality": normality,
        }),
        summary_lines,
    })
}
