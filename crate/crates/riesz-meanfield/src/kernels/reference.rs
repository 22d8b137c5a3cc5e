//! Construction of the unit-width reference kernel family by inverse radial
//! Fourier transforms of the exact symbols
//!
//!   S_V(k) = C(lambda) k^{lambda-3} F[xi](k)^2      (V = chi * Phi),
//!   S_Z(k) = sqrt(C(lambda)) k^{(lambda-3)/2} F[xi](k)  (Z = xi * Psi),
//!
//! on small radii, switching to the direct real-space quadrature of
//! `quadrature` beyond a seam radius where the mollifier support no longer
//! touches the singularity. The two routes are compared on an overlap window
//! at build time; disagreement is a hard numerical error. Every width eta
//! then follows by exact rescaling, so this build runs once per exponent.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::mollifier::MollifierProfile;
use super::quadrature;
use super::table::{Parity, RadialTable};
use super::fourier_constant;
use crate::numerics::{simpson, simpson_arr, simpson_log, simpson_log_arr, sinc, sinc_prime};
use crate::{Error, Result};

pub const REF_R_MIN: f64 = 1e-3;
pub const REF_R_MAX: f64 = 100.0;
pub const REF_NODES: usize = 4096;
/// Radius separating the Fourier route (below) from the real-space route.
const SEAM_RADIUS: f64 = 3.0;
const SEAM_TOL: f64 = 1e-5;
/// Below this wavenumber the symbol is integrated in closed form.
const K_FLOOR: f64 = 1e-4;
/// Simpson points per oscillation period in the k r > 1/2 regime.
const PPP: f64 = 160.0;

/// Unit-width kernel tables: V, V', Delta V and the half-kernel Z.
#[derive(Debug)]
pub struct ReferenceKernel {
    pub lambda: f64,
    pub v: RadialTable,
    pub dv: RadialTable,
    pub lapv: RadialTable,
    pub z: RadialTable,
}

/// Largest wavenumber worth integrating for a given symbol weight, found by
/// scanning the mollifier Fourier table for where the weight falls below
/// 1e-14 of its peak.
fn cutoff<W: Fn(f64, f64) -> f64>(prof: &MollifierProfile, weight: W) -> f64 {
    let (vals, k_min, k_max) = prof.fourier.raw();
    let n = vals.len();
    let ln_min = k_min.ln();
    let dln = (k_max.ln() - ln_min) / (n as f64 - 1.0);
    let ws: Vec<f64> = (0..n)
        .map(|i| weight((ln_min + i as f64 * dln).exp(), vals[i].abs()))
        .collect();
    let peak = ws.iter().cloned().fold(0.0, f64::max);
    let thr = 1e-14 * peak;
    let mut cut = k_max;
    for i in (0..n).rev() {
        if ws[i] > thr {
            cut = (ln_min + i as f64 * dln).exp() * 1.1;
            break;
        }
    }
    cut.clamp(2.0, k_max)
}

/// The three V-class inverse-transform moments at radius r:
/// [V, V', Delta V] = (1/2 pi^2) ∫ S_V(k) k^2 [sinc, k sinc', -k^2 sinc](kr) dk.
fn v_moments(r: f64, lambda: f64, prof: &MollifierProfile, k_cut: f64) -> [f64; 3] {
    let c = fourier_constant(lambda);
    let kf = K_FLOOR;
    // ∫_0^{kf} of c k^{lambda-1} sinc(kr), c k^lambda sinc'(kr) and
    // c k^{lambda+1} sinc(kr) with the series sinc(x) = 1 - x^2/6 + ...,
    // sinc'(x) = -x/3 + x^3/30 - ...
    let h2 = c
        * (kf.powf(lambda) / lambda - r * r * kf.powf(lambda + 2.0) / (6.0 * (lambda + 2.0)));
    let h3 = c
        * (-r * kf.powf(lambda + 2.0) / (3.0 * (lambda + 2.0))
            + r.powi(3) * kf.powf(lambda + 4.0) / (30.0 * (lambda + 4.0)));
    let h4 = c
        * (kf.powf(lambda + 2.0) / (lambda + 2.0)
            - r * r * kf.powf(lambda + 4.0) / (6.0 * (lambda + 4.0)));

    let integrand = |k: f64| -> [f64; 3] {
        let f = prof.fourier.eval(k);
        let s = c * k.powf(lambda - 3.0) * f * f;
        let kr = k * r;
        let sc = sinc(kr);
        let sp = sinc_prime(kr);
        let k2 = k * k;
        [s * k2 * sc, s * k2 * k * sp, s * k2 * k2 * sc]
    };
    let k_smooth = if r > 0.0 { (0.5 / r).min(k_cut) } else { k_cut };
    let mid = simpson_log_arr(&integrand, kf, k_smooth, 2048);
    let osc = if k_smooth < k_cut {
        // The integrand oscillates both through sinc(kr) (frequency r) and
        // through the mollifier transform itself (frequency ~1 in k), so the
        // sample count must resolve the faster of the two beat components.
        let n = ((k_cut - k_smooth) * (r + 1.0) * PPP / (2.0 * std::f64::consts::PI)).ceil()
            as usize;
        simpson_arr(&integrand, k_smooth, k_cut, n.max(8))
    } else {
        [0.0; 3]
    };
    let inv = 0.5 / (std::f64::consts::PI * std::f64::consts::PI);
    [
        inv * (h2 + mid[0] + osc[0]),
        inv * (h3 + mid[1] + osc[1]),
        -inv * (h4 + mid[2] + osc[2]),
    ]
}

/// Z(r) = (1/2 pi^2) ∫ S_Z(k) k^2 sinc(kr) dk.
fn z_moment(r: f64, lambda: f64, prof: &MollifierProfile, k_cut: f64) -> f64 {
    let a = fourier_constant(lambda).sqrt();
    let e = 0.5 * (lambda + 1.0);
    let kf = K_FLOOR;
    // ∫_0^{kf} a k^e sinc(kr) dk with sinc expanded as above.
    let head = a
        * (kf.powf(e + 1.0) / (e + 1.0) - r * r * kf.powf(e + 3.0) / (6.0 * (e + 3.0)));
    let integrand = |k: f64| {
        let f = prof.fourier.eval(k);
        a * k.powf(e - 2.0) * f * k * k * sinc(k * r)
    };
    let k_smooth = if r > 0.0 { (0.5 / r).min(k_cut) } else { k_cut };
    let mid = simpson_log(&integrand, kf, k_smooth, 2048);
    let osc = if k_smooth < k_cut {
        // Same dual-frequency consideration as in `v_moments`.
        let n = ((k_cut - k_smooth) * (r + 1.0) * PPP / (2.0 * std::f64::consts::PI)).ceil()
            as usize;
        simpson(&integrand, k_smooth, k_cut, n.max(8))
    } else {
        0.0
    };
    0.5 / (std::f64::consts::PI * std::f64::consts::PI) * (head + mid + osc)
}

impl ReferenceKernel {
    pub fn build(lambda: f64) -> Result<ReferenceKernel> {
        if !(lambda > 0.0 && lambda < 1.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "riesz exponent must satisfy 0 < lambda < d - 2 = 1, got {lambda}"
            )));
        }
        let prof = MollifierProfile::standard();
        let c = fourier_constant(lambda);
        let kc_v = cutoff(&prof, |k, f| c * k.powf(lambda + 1.0) * f * f);
        let kc_z = cutoff(&prof, |k, f| c.sqrt() * k.powf(0.5 * (lambda + 1.0)) * f);

        let far = |r: f64| -> [f64; 4] {
            [
                quadrature::chi_conv_phi(r, lambda, 1.0, &prof),
                quadrature::dv_far(r, lambda, 1.0, &prof),
                quadrature::lapv_far(r, lambda, 1.0, &prof),
                quadrature::xi_conv_psi(r, lambda, 1.0, &prof),
            ]
        };

        // Route agreement on the overlap window, where both are valid.
        for &r in &[2.4, 2.7, 3.0] {
            let m = v_moments(r, lambda, &prof, kc_v);
            let zr = z_moment(r, lambda, &prof, kc_z);
            let q = far(r);
            for (name, a, b) in [
                ("V", m[0], q[0]),
                ("V'", m[1], q[1]),
                ("lap V", m[2], q[2]),
                ("Z", zr, q[3]),
            ] {
                let rel = (a - b).abs() / b.abs().max(1e-12);
                if rel > SEAM_TOL {
                    return Err(Error::Numerical(format!(
                        "kernel construction routes disagree for {name} at r = {r} \
                         (lambda = {lambda}): fourier {a:e} vs quadrature {b:e}, rel {rel:e}"
                    )));
                }
            }
        }

        let n = REF_NODES;
        let ln_min = REF_R_MIN.ln();
        let dln = (REF_R_MAX.ln() - ln_min) / (n as f64 - 1.0);
        let mut v = vec![0.0; n];
        let mut dv = vec![0.0; n];
        let mut lapv = vec![0.0; n];
        let mut z = vec![0.0; n];
        for i in 0..n {
            let r = (ln_min + i as f64 * dln).exp();
            if r <= SEAM_RADIUS {
                let m = v_moments(r, lambda, &prof, kc_v);
                v[i] = m[0];
                dv[i] = m[1];
                lapv[i] = m[2];
                z[i] = z_moment(r, lambda, &prof, kc_z);
            } else {
                let q = far(r);
                v[i] = q[0];
                dv[i] = q[1];
                lapv[i] = q[2];
                z[i] = q[3];
            }
        }

        let m0 = v_moments(0.0, lambda, &prof, kc_v);
        let z0 = z_moment(0.0, lambda, &prof, kc_z);
        let mu = 0.5 * (lambda + 3.0);
        Ok(ReferenceKernel {
            lambda,
            v: RadialTable::new(REF_R_MIN, REF_R_MAX, v, Parity::Even, m0[0], lambda),
            dv: RadialTable::new(REF_R_MIN, REF_R_MAX, dv, Parity::Odd, 0.0, lambda + 1.0),
            lapv: RadialTable::new(REF_R_MIN, REF_R_MAX, lapv, Parity::Even, m0[2], lambda + 2.0),
            z: RadialTable::new(REF_R_MIN, REF_R_MAX, z, Parity::Even, z0, mu),
        })
    }
}

/// Process-wide cache: the reference build is expensive and exact rescaling
/// makes one build serve every mollification width at a given exponent.
pub fn reference_for(lambda: f64) -> Result<Arc<ReferenceKernel>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ReferenceKernel>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = lambda.to_bits();
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let built = Arc::new(ReferenceKernel::build(lambda)?);
    let mut guard = cache.lock().unwrap();
    Ok(guard.entry(key).or_insert(built).clone())
}
