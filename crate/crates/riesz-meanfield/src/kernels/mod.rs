//! Mollified attractive Riesz interaction kernels.
//!
//! The interaction potential is Phi(x) = |x|^{-lambda} in dimension three
//! with 0 < lambda < 1, mollified at width eta by a fixed smooth bump:
//! V_eta = chi_eta * Phi with chi_eta = xi_eta * xi_eta. The same kernel
//! factorizes as V_eta = Z_eta * Z_eta with Z_eta = xi_eta * Psi and
//! Psi = c_psi |x|^{-(lambda+3)/2}, which is what makes the mollified
//! energy a nonnegative quadratic form.
//!
//! Kernels are represented by radial tables built once for eta = 1
//! (`reference`) and rescaled exactly to any width; `quadrature` holds the
//! independent real-space route used both for large radii and as the oracle
//! in the test suite; `pair_table` flattens a kernel set into the uniform
//! r^2-grid used by the O(N^2) particle loops; `scaling` measures the
//! sup-norm growth of the kernels along a moderate-interaction schedule.

pub mod mollifier;
pub mod pair_table;
pub mod quadrature;
pub mod reference;
pub mod scaling;
pub mod table;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

pub use mollifier::MollifierProfile;
pub use pair_table::PairTable;
pub use reference::{reference_for, ReferenceKernel};
pub use table::{Parity, RadialTable};

use crate::{Error, Result};

/// C(s) in F[|x|^{-s}](k) = C(s) |k|^{s-3} for 0 < s < 3 (dimension 3,
/// transform convention ∫ f e^{-i k.x} dx).
pub fn fourier_constant(s: f64) -> f64 {
    assert!(s > 0.0 && s < 3.0, "riesz symbol constant needs 0 < s < 3");
    let pi = std::f64::consts::PI;
    2.0_f64.powf(3.0 - s) * pi.powf(1.5)
        * statrs::function::gamma::gamma((3.0 - s) / 2.0)
        / statrs::function::gamma::gamma(s / 2.0)
}

/// Amplitude c_psi of the half-kernel Psi = c_psi |x|^{-(lambda+3)/2},
/// fixed by Psi * Psi = Phi.
pub fn psi_constant(lambda: f64) -> f64 {
    fourier_constant(lambda).sqrt() / fourier_constant(0.5 * (lambda + 3.0))
}

/// The bare Riesz kernel |x|^{-lambda}. Panics for r <= 0; use
/// `riesz_phi_checked` where the radius is not known to be positive.
pub fn riesz_phi(r: f64, lambda: f64) -> f64 {
    assert!(r > 0.0, "riesz kernel evaluated at nonpositive radius {r}");
    r.powf(-lambda)
}

pub fn riesz_phi_checked(r: f64, lambda: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Config(format!(
            "riesz kernel evaluated at nonpositive radius {r}"
        )));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!(
            "riesz exponent out of range (0, 1): {lambda}"
        )));
    }
    Ok(r.powf(-lambda))
}

/// Validated kernel parameters: dimension (only 3 is supported) and the
/// Riesz exponent in the subcritical window 0 < lambda < dim - 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszParams {
    pub dim: usize,
    pub lambda: f64,
}

impl RieszParams {
    pub fn new(dim: usize, lambda: f64) -> Result<RieszParams> {
        if dim != 3 {
            return Err(Error::Config(format!(
                "only dimension 3 is supported, got {dim}"
            )));
        }
        if !lambda.is_finite() || !(lambda > 0.0 && lambda < (dim - 2) as f64) {
            return Err(Error::Config(format!(
                "riesz exponent must satisfy 0 < lambda < {}, got {lambda}",
                dim - 2
            )));
        }
        Ok(RieszParams { dim, lambda })
    }

    pub fn phi(&self, r: f64) -> f64 {
        riesz_phi(r, self.lambda)
    }
}

/// Radial tables for one mollification width: V, V', Delta V and the
/// half-kernel Z, plus the exact Fourier symbols.
#[derive(Debug, Clone)]
pub struct RadialKernelSet {
    pub lambda: f64,
    pub eta: f64,
    pub v: RadialTable,
    pub dv: RadialTable,
    pub lapv: RadialTable,
    pub z: RadialTable,
    prof: Arc<MollifierProfile>,
}

/// Build the kernel set at width eta by exact rescaling of the cached
/// reference build: V_eta(r) = eta^{-lambda} V_1(r/eta) and so on.
pub fn build_kernel_set(lambda: f64, eta: f64) -> Result<RadialKernelSet> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!(
            "mollification width must be positive and finite, got {eta}"
        )));
    }
    let r = reference_for(lambda)?;
    Ok(RadialKernelSet {
        lambda,
        eta,
        v: r.v.rescaled(eta, eta.powf(-lambda)),
        dv: r.dv.rescaled(eta, eta.powf(-lambda - 1.0)),
        lapv: r.lapv.rescaled(eta, eta.powf(-lambda - 2.0)),
        z: r.z.rescaled(eta, eta.powf(-0.5 * (lambda + 3.0))),
        prof: MollifierProfile::standard(),
    })
}

impl RadialKernelSet {
    pub fn eval_v(&self, r: f64) -> f64 {
        self.v.eval(r)
    }

    pub fn eval_dv(&self, r: f64) -> f64 {
        self.dv.eval(r)
    }

    pub fn eval_lapv(&self, r: f64) -> f64 {
        self.lapv.eval(r)
    }

    pub fn eval_z(&self, r: f64) -> f64 {
        self.z.eval(r)
    }

    /// g(r) with grad V(x) = g(|x|) x; finite at the origin.
    pub fn grad_coeff(&self, r: f64) -> f64 {
        if r <= self.dv.r_min {
            self.dv.values()[0] / self.dv.r_min
        } else {
            self.dv.eval(r) / r
        }
    }

    pub fn eval_grad(&self, dx: [f64; 3]) -> [f64; 3] {
        let r = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
        let g = self.grad_coeff(r);
        [g * dx[0], g * dx[1], g * dx[2]]
    }

    /// Fourier symbol of V_eta at wavenumber k > 0.
    pub fn symbol_v(&self, k: f64) -> f64 {
        assert!(k > 0.0);
        let f = self.prof.fourier.eval(self.eta * k);
        fourier_constant(self.lambda) * k.powf(self.lambda - 3.0) * f * f
    }

    /// Fourier symbol of Z_eta at wavenumber k > 0.
    pub fn symbol_z(&self, k: f64) -> f64 {
        assert!(k > 0.0);
        let f = self.prof.fourier.eval(self.eta * k);
        fourier_constant(self.lambda).sqrt() * k.powf(0.5 * (self.lambda - 3.0)) * f
    }

    /// ||Z_eta||_{L^2}, integrated from the radial table with its exact
    /// near-origin and power-tail models.
    pub fn z_l2(&self) -> f64 {
        let t = &self.z;
        let n = t.len();
        let dln = (t.r_max / t.r_min).ln() / (n as f64 - 1.0);
        let g = |i: usize| {
            let r = t.node_radius(i);
            let z = t.values()[i];
            z * z * r * r * r
        };
        let mut body = 0.0;
        for i in 0..n - 1 {
            body += 0.5 * (g(i) + g(i + 1)) * dln;
        }
        let head = t.value_at_zero().powi(2) * t.r_min.powi(3) / 3.0;
        let mu = 0.5 * (self.lambda + 3.0);
        let tail = t.values()[n - 1].powi(2) * t.r_max.powi(3) / (2.0 * mu - 3.0);
        (4.0 * std::f64::consts::PI * (head + body + tail)).sqrt()
    }

    /// Write the kernel set to a text file with a trailing integrity digest.
    /// Values are stored as bit patterns, so a round trip is exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "riesz kernel table v1");
        let _ = writeln!(s, "lambda {:016x} {:.17e}", self.lambda.to_bits(), self.lambda);
        let _ = writeln!(s, "eta {:016x} {:.17e}", self.eta.to_bits(), self.eta);
        for (name, t) in self.tables() {
            let parity = match t.parity() {
                Parity::Even => "even",
                Parity::Odd => "odd",
            };
            let _ = writeln!(
                s,
                "table {name} {} {parity} {:016x} {:016x} {:016x} {:016x}",
                t.len(),
                t.r_min.to_bits(),
                t.r_max.to_bits(),
                t.value_at_zero().to_bits(),
                t.tail_exp().to_bits()
            );
            for v in t.values() {
                let _ = writeln!(s, "{:016x}", v.to_bits());
            }
        }
        let digest = Sha256::digest(s.as_bytes());
        let _ = writeln!(s, "sha256 {digest:x}");
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RadialKernelSet> {
        let text = std::fs::read_to_string(path)?;
        let bad = |m: &str| Error::Config(format!("kernel file {}: {m}", path.display()));
        let body_end = text
            .rfind("sha256 ")
            .ok_or_else(|| bad("missing integrity digest"))?;
        let (body, foot) = text.split_at(body_end);
        let stored = foot
            .trim_start_matches("sha256 ")
            .trim();
        let digest = format!("{:x}", Sha256::digest(body.as_bytes()));
        if digest != stored {
            return Err(bad("integrity digest mismatch"));
        }

        let mut lines = body.lines();
        if lines.next() != Some("riesz kernel table v1") {
            return Err(bad("unrecognized header"));
        }
        let f64_field = |line: Option<&str>, key: &str| -> Result<f64> {
            let line = line.ok_or_else(|| bad("truncated file"))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(&format!("expected `{key}` line")));
            }
            let bits = it.next().ok_or_else(|| bad("missing value"))?;
            let bits = u64::from_str_radix(bits, 16)
                .map_err(|_| bad("malformed value bits"))?;
            Ok(f64::from_bits(bits))
        };
        let lambda = f64_field(lines.next(), "lambda")?;
        let eta = f64_field(lines.next(), "eta")?;

        let mut tables = Vec::new();
        for expect in ["v", "dv", "lapv", "z"] {
            let header = lines.next().ok_or_else(|| bad("truncated file"))?;
            let mut it = header.split_whitespace();
            if it.next() != Some("table") || it.next() != Some(expect) {
                return Err(bad(&format!("expected table `{expect}`")));
            }
            let n: usize = it
                .next()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| bad("malformed table length"))?;
            let parity = match it.next() {
                Some("even") => Parity::Even,
                Some("odd") => Parity::Odd,
                _ => return Err(bad("malformed parity")),
            };
            let mut nums = [0.0; 4];
            for slot in nums.iter_mut() {
                let bits = it.next().ok_or_else(|| bad("truncated table header"))?;
                *slot = f64::from_bits(
                    u64::from_str_radix(bits, 16).map_err(|_| bad("malformed bits"))?,
                );
            }
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                let line = lines.next().ok_or_else(|| bad("truncated table body"))?;
                values.push(f64::from_bits(
                    u64::from_str_radix(line.trim(), 16).map_err(|_| bad("malformed bits"))?,
                ));
            }
            tables.push(RadialTable::new(nums[0], nums[1], values, parity, nums[2], nums[3]));
        }
        let z = tables.pop().unwrap();
        let lapv = tables.pop().unwrap();
        let dv = tables.pop().unwrap();
        let v = tables.pop().unwrap();
        Ok(RadialKernelSet {
            lambda,
            eta,
            v,
            dv,
            lapv,
            z,
            prof: MollifierProfile::standard(),
        })
    }

    fn tables(&self) -> [(&'static str, &RadialTable); 4] {
        [("v", &self.v), ("dv", &self.dv), ("lapv", &self.lapv), ("z", &self.z)]
    }
}

/// Fourier symbol of the bare Riesz kernel at k > 0.
pub fn symbol_phi(lambda: f64, k: f64) -> f64 {
    assert!(k > 0.0);
    fourier_constant(lambda) * k.powf(lambda - 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validate_dimension_and_exponent() {
        assert!(RieszParams::new(3, 0.5).is_ok());
        assert!(RieszParams::new(2, 0.5).is_err());
        assert!(RieszParams::new(3, 1.0).is_err());
        assert!(RieszParams::new(3, -0.1).is_err());
        assert!(riesz_phi_checked(0.0, 0.5).is_err());
        assert!((riesz_phi(4.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coulomb_constant_is_four_pi() {
        assert!((fourier_constant(1.0) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
