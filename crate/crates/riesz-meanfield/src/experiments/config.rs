//! Regime configuration: a flat `key = value` text format with a canonical
//! serialization, plus validation of the admissibility gates that the
//! convergence theorems impose on `(d, lambda, beta)`.
//!
//! # File format
//!
//! One `key = value` pair per line; `#` starts a comment; blank lines are
//! ignored. Lists are comma-separated. Every key has a default, so the empty
//! file is a valid configuration. Keys:
//!
//! | key            | meaning                                            | default |
//! |----------------|----------------------------------------------------|---------|
//! | `d`            | ambient dimension (solvers are specialized to 3)   | `3` |
//! | `lambda`       | Riesz exponent, in `(0, 1)`                         | `0.5` |
//! | `beta`         | mollification exponent, `eta = N^{-beta}`           | `0.05` |
//! | `sigma`        | diffusion strength                                  | `0.25` |
//! | `kappa`        | interaction sign/strength (+1 attractive)           | `1` |
//! | `n_list`       | particle counts, strictly increasing                | `500,1000,2000,4000` |
//! | `realizations` | Monte Carlo realizations per particle count         | `50` |
//! | `t_end`        | time horizon                                        | `0.5` |
//! | `dt`           | Euler-Maruyama / PDE time step                      | `0.01` |
//! | `save_every`   | statistic checkpoint stride, in steps               | `5` |
//! | `box_length`   | periodic box side length                            | `16` |
//! | `box_m`        | grid points per axis (even, >= 8)                   | `64` |
//! | `alpha_list`   | coupling thresholds `N^{-alpha}`                    | `0.3` |
//! | `theta_list`   | law-of-large-numbers thresholds `N^{-theta}`        | `0.3` |
//! | `eta_list`     | widths for the PDE convergence sweep, decreasing    | `0.4,0.2,0.1,0.05` |
//! | `u0`           | initial density: `gaussian:<std>` or `twobump:<std>,<sep>` | `gaussian:1` |
//! | `seed`         | master RNG seed                                     | `1` |
//!
//! The canonical form prints the keys in the table order with shortest
//! round-trip float formatting; `parse(canonical(text)) == parse(text)` and
//! `canonical` is idempotent. The SHA-256 of the canonical form is the
//! configuration hash used for content-addressed run directories.

use crate::fields::Box3;
use crate::particles::InitialDensity;
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Full description of one experimental regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSpec {
    /// Ambient dimension; the spectral solvers are specialized to 3.
    pub d: u32,
    /// Riesz exponent `lambda` in `(0, 1)`.
    pub lambda: f64,
    /// Mollification exponent: each particle count runs at `eta = N^{-beta}`.
    pub beta: f64,
    /// Diffusion strength `sigma`.
    pub sigma: f64,
    /// Interaction sign/strength; `+1` attractive, `-1` repulsive, `0` free.
    pub kappa: f64,
    /// Particle counts for sweeps, strictly increasing.
    pub n_list: Vec<usize>,
    /// Monte Carlo realizations per particle count.
    pub realizations: usize,
    /// Time horizon.
    pub t_end: f64,
    /// Time step shared by the particle scheme and the PDE solver.
    pub dt: f64,
    /// Statistic checkpoint stride in steps; must divide `t_end/dt`.
    pub save_every: usize,
    /// Periodic box side length.
    pub box_length: f64,
    /// Grid points per axis.
    pub box_m: usize,
    /// Coupling thresholds `N^{-alpha}` for the pathwise comparison.
    pub alpha_list: Vec<f64>,
    /// Thresholds `N^{-theta}` for the drift law-of-large-numbers event.
    pub theta_list: Vec<f64>,
    /// Mollification widths for the PDE convergence sweep, decreasing.
    pub eta_list: Vec<f64>,
    /// Initial density.
    pub u0: InitialDensity,
    /// Master seed; realization `r` draws from an independent substream.
    pub seed: u64,
}

impl Default for RegimeSpec {
    fn default() -> Self {
        Self {
            d: 3,
            lambda: 0.5,
            beta: 0.05,
            sigma: 0.25,
            kappa: 1.0,
            n_list: vec![500, 1000, 2000, 4000],
            realizations: 50,
            t_end: 0.5,
            dt: 0.01,
            save_every: 5,
            box_length: 16.0,
            box_m: 64,
            alpha_list: vec![0.3],
            theta_list: vec![0.3],
            eta_list: vec![0.4, 0.2, 0.1, 0.05],
            u0: InitialDensity::IsotropicGaussian { std: 1.0 },
            seed: 1,
        }
    }
}

fn fmt_list<T: std::fmt::Display>(items: &[T]) -> String {
    let mut s = String::new();
    for (k, v) in items.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

fn fmt_u0(u0: &InitialDensity) -> String {
    match *u0 {
        InitialDensity::IsotropicGaussian { std } => format!("gaussian:{std}"),
        InitialDensity::TwoBump { std, separation } => {
            format!("twobump:{std},{separation}")
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("key `{key}`: `{raw}` is not a number")))
}

fn parse_usize(key: &str, raw: &str) -> Result<usize> {
    raw.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("key `{key}`: `{raw}` is not a non-negative integer")))
}

fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|p| parse_f64(key, p)).collect()
}

fn parse_usize_list(key: &str, raw: &str) -> Result<Vec<usize>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|p| parse_usize(key, p)).collect()
}

fn parse_u0(raw: &str) -> Result<InitialDensity> {
    let raw = raw.trim();
    let (name, args) = raw
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("u0 `{raw}`: expected `<kind>:<params>`")))?;
    match name.trim() {
        "gaussian" => Ok(InitialDensity::IsotropicGaussian { std: parse_f64("u0", args)? }),
        "twobump" => {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::Config(format!(
                    "u0 `{raw}`: twobump takes `<std>,<separation>`"
                )));
            }
            Ok(InitialDensity::TwoBump {
                std: parse_f64("u0", parts[0])?,
                separation: parse_f64("u0", parts[1])?,
            })
        }
        other => Err(Error::Config(format!("u0 kind `{other}` is not one of gaussian, twobump"))),
    }
}

impl RegimeSpec {
    /// Parse the flat `key = value` format. Unknown and duplicate keys are
    /// rejected; missing keys take their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = RegimeSpec::default();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            match key {
                "d" => spec.d = parse_usize(key, value)? as u32,
                "lambda" => spec.lambda = parse_f64(key, value)?,
                "beta" => spec.beta = parse_f64(key, value)?,
                "sigma" => spec.sigma = parse_f64(key, value)?,
                "kappa" => spec.kappa = parse_f64(key, value)?,
                "n_list" => spec.n_list = parse_usize_list(key, value)?,
                "realizations" => spec.realizations = parse_usize(key, value)?,
                "t_end" => spec.t_end = parse_f64(key, value)?,
                "dt" => spec.dt = parse_f64(key, value)?,
                "save_every" => spec.save_every = parse_usize(key, value)?,
                "box_length" => spec.box_length = parse_f64(key, value)?,
                "box_m" => spec.box_m = parse_usize(key, value)?,
                "alpha_list" => spec.alpha_list = parse_f64_list(key, value)?,
                "theta_list" => spec.theta_list = parse_f64_list(key, value)?,
                "eta_list" => spec.eta_list = parse_f64_list(key, value)?,
                "u0" => spec.u0 = parse_u0(value)?,
                "seed" => {
                    spec.seed = value.trim().parse::<u64>().map_err(|_| {
                        Error::Config(format!("key `seed`: `{value}` is not a u64"))
                    })?;
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(spec)
    }

    /// Canonical serialization: fixed key order, shortest round-trip floats.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "kappa = {}", self.kappa);
        let _ = writeln!(s, "n_list = {}", fmt_list(&self.n_list));
        let _ = writeln!(s, "realizations = {}", self.realizations);
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "save_every = {}", self.save_every);
        let _ = writeln!(s, "box_length = {}", self.box_length);
        let _ = writeln!(s, "box_m = {}", self.box_m);
        let _ = writeln!(s, "alpha_list = {}", fmt_list(&self.alpha_list));
        let _ = writeln!(s, "theta_list = {}", fmt_list(&self.theta_list));
        let _ = writeln!(s, "eta_list = {}", fmt_list(&self.eta_list));
        let _ = writeln!(s, "u0 = {}", fmt_u0(&self.u0));
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// SHA-256 hex digest of the canonical form.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        let digest = h.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }

    /// Number of time steps (`t_end / dt`, validated to be integral).
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Mollification width for a given particle count.
    pub fn eta_of(&self, n: usize) -> f64 {
        (n as f64).powf(-self.beta)
    }

    /// Structural validation (positivity, divisibility, ranges). The
    /// theorem gates are checked separately by [`validate_regime`].
    pub fn validate(&self) -> Result<()> {
        if self.d != 3 {
            return Err(Error::Config(format!("d = {} is unsupported; solvers require d = 3", self.d)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!(
                "lambda = {} must lie in (0, 1) = (0, d - 2) for d = 3",
                self.lambda
            )));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(Error::Config(format!("beta = {} must lie in (0, 0.5)", self.beta)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma = {} must be positive", self.sigma)));
        }
        if !self.kappa.is_finite() {
            return Err(Error::Config("kappa must be finite".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must be nonempty".into()));
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::Config("every N in n_list must be at least 2".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_list must be strictly increasing".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be positive".into()));
        }
        if !(self.t_end > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("t_end and dt must be positive".into()));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
            return Err(Error::Config(format!(
                "t_end = {} must be a positive integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.save_every == 0 || self.n_steps() % self.save_every != 0 {
            return Err(Error::Config(format!(
                "save_every = {} must divide the {} steps",
                self.save_every,
                self.n_steps()
            )));
        }
        Box3::new(self.box_length, self.box_m)?;
        for &a in &self.alpha_list {
            if !(a > 0.0 && a < 0.5) {
                return Err(Error::Config(format!("alpha = {a} must lie in (0, 0.5)")));
            }
        }
        for &th in &self.theta_list {
            if !(th > 0.0 && th < 0.5) {
                return Err(Error::Config(format!("theta = {th} must lie in (0, 0.5)")));
            }
        }
        for &eta in &self.eta_list {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::Config(format!("eta = {eta} must be positive")));
            }
        }
        if self.eta_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eta_list must be strictly decreasing".into()));
        }
        match self.u0 {
            InitialDensity::IsotropicGaussian { std } => {
                if !(std > 0.0) {
                    return Err(Error::Config("u0 gaussian std must be positive".into()));
                }
            }
            InitialDensity::TwoBump { std, separation } => {
                if !(std > 0.0) || separation < 0.0 {
                    return Err(Error::Config("u0 twobump needs std > 0, separation >= 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of checking a regime against the theorem admissibility gates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GateReport {
    /// Upper limit on `beta` for the convergence-in-probability theorem:
    /// `1 / (4 lambda + 4 d)`.
    pub beta_prob_max: f64,
    /// Upper limit on `beta` for the mean-square rate theorem:
    /// `1 / (8 lambda + 4 d)`.
    pub beta_l2_max: f64,
    pub thm_prob_ok: bool,
    pub thm_l2_ok: bool,
    /// Admissible coupling-exponent window `(beta (lambda + d), 1/2 - beta (lambda + 1))`.
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Every configured alpha lies strictly inside the window.
    pub alphas_ok: bool,
    /// Largest admissible `theta` for the drift law of large numbers:
    /// `1/2 - beta (lambda + 2)`.
    pub theta_max: f64,
    /// Informational: every configured theta is below `theta_max`.
    pub thetas_ok: bool,
    /// The critical integrability index `p* = d / (d - lambda)`.
    pub p_star: f64,
    /// `L^{p*}` norm of the configured initial density on the grid.
    pub u0_norm_pstar: f64,
    /// Attractive small-data threshold on `||u0||_{p*}` assembled from the
    /// sharp diagonal Hardy-Littlewood-Sobolev and Sobolev constants.
    pub smallness_threshold: f64,
    /// Informational: the small-data condition holds (only meaningful for
    /// attractive runs, `kappa > 0`).
    pub smallness_ok: bool,
    /// Mollification width per configured particle count.
    pub eta_per_n: Vec<(usize, f64)>,
    /// All hard gates passed (`thm_prob_ok && thm_l2_ok && alphas_ok`).
    pub pass: bool,
}

/// Sharp diagonal Hardy-Littlewood-Sobolev constant for the bilinear form
/// with kernel `|x|^{-mu}` on `L^p x L^p`, `p = 2d/(2d - mu)`.
fn hls_diagonal(d: f64, mu: f64) -> f64 {
    use statrs::function::gamma::gamma;
    PI.powf(mu / 2.0) * gamma((d - mu) / 2.0) / gamma(d - mu / 2.0)
        * (gamma(d / 2.0) / gamma(d)).powf(-1.0 + mu / d)
}

/// Check the theorem gates for a structurally valid regime and assemble the
/// admissibility report. The small-data and `theta` checks are diagnostics;
/// the `pass` flag covers only the hard gates.
pub fn validate_regime(spec: &RegimeSpec) -> Result<GateReport> {
    spec.validate()?;
    let d = spec.d as f64;
    let lambda = spec.lambda;
    let beta = spec.beta;

    let beta_prob_max = 1.0 / (4.0 * lambda + 4.0 * d);
    let beta_l2_max = 1.0 / (8.0 * lambda + 4.0 * d);
    let thm_prob_ok = beta < beta_prob_max;
    let thm_l2_ok = beta < beta_l2_max;

    let alpha_lo = beta * (lambda + d);
    let alpha_hi = 0.5 - beta * (lambda + 1.0);
    let alphas_ok = spec.alpha_list.iter().all(|&a| a > alpha_lo && a < alpha_hi);

    let theta_max = 0.5 - beta * (lambda + 2.0);
    let thetas_ok = spec.theta_list.iter().all(|&th| th < theta_max);

    let p_star = d / (d - lambda);
    let grid = Box3::new(spec.box_length, spec.box_m)?;
    let u0 = spec.u0.render(grid)?;
    let u0_norm_pstar = u0.lp_norm(p_star);

    // Small-data threshold for the attractive L^{p*} a-priori bound:
    // 4 sigma / (p* lambda (d - 2 - lambda) C_HLS(lambda + 2) C_Sob^2),
    // with the sharp constants as stand-ins for the non-sharp ones the
    // energy estimate actually uses (diagnostic only).
    let c_hls = hls_diagonal(d, lambda + 2.0);
    let c_sob_sq = 4.0 / (3.0 * (2.0 * PI * PI).powf(2.0 / 3.0));
    let smallness_threshold =
        4.0 * spec.sigma / (p_star * lambda * (d - 2.0 - lambda).abs() * c_hls * c_sob_sq);
    let smallness_ok = spec.kappa <= 0.0 || u0_norm_pstar < smallness_threshold;

    let eta_per_n: Vec<(usize, f64)> = spec.n_list.iter().map(|&n| (n, spec.eta_of(n))).collect();
    let pass = thm_prob_ok && thm_l2_ok && alphas_ok;

    Ok(GateReport {
        beta_prob_max,
        beta_l2_max,
        thm_prob_ok,
        thm_l2_ok,
        alpha_lo,
        alpha_hi,
        alphas_ok,
        theta_max,
        thetas_ok,
        p_star,
        u0_norm_pstar,
        smallness_threshold,
        smallness_ok,
        eta_per_n,
        pass,
    })
}

fn yes_no(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Human-readable regime report.
pub fn report_text(spec: &RegimeSpec, gates: &GateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "regime validation");
    let _ = writeln!(
        s,
        "  d = {}, lambda = {}, beta = {}, sigma = {}, kappa = {}",
        spec.d, spec.lambda, spec.beta, spec.sigma, spec.kappa
    );
    let _ = writeln!(
        s,
        "  probability-rate gate: beta < 1/(4 lambda + 4 d) = {:.6} -> {}",
        gates.beta_prob_max,
        yes_no(gates.thm_prob_ok)
    );
    let _ = writeln!(
        s,
        "  mean-square-rate gate: beta < 1/(8 lambda + 4 d) = {:.6} -> {}",
        gates.beta_l2_max,
        yes_no(gates.thm_l2_ok)
    );
    let _ = writeln!(
        s,
        "  admissible alpha interval: ({:.6}, {:.6}); configured: [{}] -> {}",
        gates.alpha_lo,
        gates.alpha_hi,
        fmt_list(&spec.alpha_list),
        yes_no(gates.alphas_ok)
    );
    let _ = writeln!(
        s,
        "  drift-LLN theta bound: theta < {:.6}; configured: [{}] -> {}",
        gates.theta_max,
        fmt_list(&spec.theta_list),
        if gates.thetas_ok { "ok" } else { "outside (diagnostic)" }
    );
    let etas: Vec<String> =
        gates.eta_per_n.iter().map(|(n, e)| format!("N={n} -> eta={e:.6}")).collect();
    let _ = writeln!(s, "  mollification widths: {}", etas.join(", "));
    let _ = writeln!(s, "  p* = d/(d - lambda) = {}", gates.p_star);
    let _ = writeln!(
        s,
        "  ||u0||_p* = {:.6} vs attractive small-data threshold {:.6} -> {}",
        gates.u0_norm_pstar,
        gates.smallness_threshold,
        if gates.smallness_ok { "ok (diagnostic)" } else { "exceeded (diagnostic)" }
    );
    let _ = writeln!(s, "  overall: {}", yes_no(gates.pass));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip_is_the_identity() {
        let spec = RegimeSpec::default();
        let text = spec.canonical();
        let reparsed = RegimeSpec::parse(&text).unwrap();
        assert_eq!(reparsed, spec);
        assert_eq!(reparsed.canonical(), text);

        // A scrambled but equivalent file normalizes to the same canonical
        // form and hash.
        let scrambled = "# comment\n  seed=1\nkappa = 1.0\n\nbeta = 0.05 # trailing\n";
        let from_scrambled = RegimeSpec::parse(scrambled).unwrap();
        assert_eq!(from_scrambled, spec);
        assert_eq!(from_scrambled.config_hash(), spec.config_hash());
    }

    #[test]
    fn unknown_duplicate_and_malformed_keys_are_rejected() {
        assert!(RegimeSpec::parse("bogus = 1").is_err());
        assert!(RegimeSpec::parse("beta = 0.05\nbeta = 0.06").is_err());
        assert!(RegimeSpec::parse("beta").is_err());
        assert!(RegimeSpec::parse("u0 = ring:1").is_err());
        assert!(RegimeSpec::parse("n_list = 10,abc").is_err());
    }

    #[test]
    fn default_regime_passes_both_gates_with_the_expected_arithmetic() {
        let spec = RegimeSpec::default();
        let gates = validate_regime(&spec).unwrap();
        // 1/(4*0.5 + 12) = 1/14, 1/(8*0.5 + 12) = 1/16.
        assert!((gates.beta_prob_max - 1.0 / 14.0).abs() < 1e-15);
        assert!((gates.beta_l2_max - 1.0 / 16.0).abs() < 1e-15);
        assert!(gates.thm_prob_ok && gates.thm_l2_ok);
        // alpha window (0.05 * 3.5, 0.5 - 0.05 * 1.5) = (0.175, 0.425).
        assert!((gates.alpha_lo - 0.175).abs() < 1e-15);
        assert!((gates.alpha_hi - 0.425).abs() < 1e-15);
        assert!(gates.alphas_ok);
        assert!((gates.p_star - 1.2).abs() < 1e-15);
        assert!(gates.pass);
        // Standard Gaussian initial data satisfies the small-data diagnostic.
        assert!(gates.smallness_ok, "||u0||_p* = {} vs {}", gates.u0_norm_pstar, gates.smallness_threshold);
    }

    #[test]
    fn beta_between_the_gates_fails_only_the_mean_square_gate() {
        let mut spec = RegimeSpec::default();
        spec.beta = 0.07;
        // Keep alphas inside the shifted window (0.245, 0.395).
        spec.alpha_list = vec![0.3];
        let gates = validate_regime(&spec).unwrap();
        assert!(gates.thm_prob_ok, "0.07 < 1/14 = {:.4}", gates.beta_prob_max);
        assert!(!gates.thm_l2_ok, "0.07 > 1/16 = {:.4}", gates.beta_l2_max);
        assert!(gates.alphas_ok);
        assert!(!gates.pass);
    }

    #[test]
    fn structural_validation_rejects_bad_configs() {
        let mut s = RegimeSpec::default();
        s.d = 2;
        assert!(s.validate().is_err());

        let mut s = RegimeSpec::default();
        s.t_end = 0.503;
        assert!(s.validate().is_err());

        let mut s = RegimeSpec::default();
        s.save_every = 7; // does not divide 50
        assert!(s.validate().is_err());

        let mut s = RegimeSpec::default();
        s.n_list = vec![1000, 500];
        assert!(s.validate().is_err());

        let mut s = RegimeSpec::default();
        s.alpha_list = vec![0.6];
        assert!(s.validate().is_err());

        let mut s = RegimeSpec::default();
        s.eta_list = vec![0.1, 0.2];
        assert!(s.validate().is_err());
    }

    #[test]
    fn gaussian_lp_norm_matches_the_closed_form() {
        // ||g||_p for a standard isotropic Gaussian in d = 3:
        // (2 pi)^{-3 (p - 1) / (2 p)} p^{-3 / (2 p)}.
        let spec = RegimeSpec::default();
        let gates = validate_regime(&spec).unwrap();
        let p = gates.p_star;
        let exact = (2.0 * PI).powf(-3.0 * (p - 1.0) / (2.0 * p)) * p.powf(-3.0 / (2.0 * p));
        assert!(
            (gates.u0_norm_pstar - exact).abs() < 1e-4,
            "grid {} vs exact {}",
            gates.u0_norm_pstar,
            exact
        );
    }
}
