//! The standard compactly supported bump mollifier
//! ξ(x) = c_ξ exp(-1/(1-|x|^2)) on |x| < 1, normalized to unit mass in R^3,
//! together with its radial Fourier table F[ξ](k) = 4π ∫ r^2 ξ(r) sinc(kr) dr,
//! the self-convolution χ = ξ * ξ and the moment constants used by small-k
//! series. Everything is built once per process and shared.

use std::sync::{Arc, OnceLock};

use crate::numerics::{catmull_rom, simpson, sinc};

const XI_QUAD_N: usize = 8192;
const CUM_N: usize = 16384;
const CHI_NODES: usize = 4096;
pub(crate) const CHI_SUPPORT: f64 = 2.0;
const K_TAB_MIN: f64 = 1e-4;
const K_TAB_MAX: f64 = 512.0;
const K_TAB_N: usize = 4096;

/// Unnormalized bump profile exp(-1/(1-r^2)) for r in [0, 1).
fn bump_raw(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// Radial Fourier transform table of the mollifier with cubic log-k
/// interpolation, a moment series below the table and zero above it.
#[derive(Debug)]
pub struct MollifierFourier {
    values: Vec<f64>,
    ln_k_min: f64,
    inv_dln: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub m2: f64,
    pub m4: f64,
}

impl MollifierFourier {
    /// F[ξ](k); total in k (negative arguments use |k|).
    pub fn eval(&self, k: f64) -> f64 {
        let k = k.abs();
        if k == 0.0 {
            return 1.0;
        }
        if k < self.k_min {
            let k2 = k * k;
            return 1.0 - k2 * self.m2 / 6.0 + k2 * k2 * self.m4 / 120.0;
        }
        if k >= self.k_max {
            return 0.0;
        }
        let u = (k.ln() - self.ln_k_min) * self.inv_dln;
        catmull_rom(&self.values, u)
    }

    pub(crate) fn raw(&self) -> (&[f64], f64, f64) {
        (&self.values, self.k_min, self.k_max)
    }

    pub(crate) fn from_raw(values: Vec<f64>, k_min: f64, k_max: f64, m2: f64, m4: f64) -> Self {
        let n = values.len();
        let ln_k_min = k_min.ln();
        let inv_dln = (n as f64 - 1.0) / (k_max.ln() - ln_k_min);
        MollifierFourier { values, ln_k_min, inv_dln, k_min, k_max, m2, m4 }
    }
}

/// The standard bump mollifier with its derived tables.
#[derive(Debug)]
pub struct MollifierProfile {
    /// Normalization constant: ∫_{R^3} ξ = 1.
    pub c_xi: f64,
    /// Second radial moment ∫ |x|^2 ξ(x) dx.
    pub m2: f64,
    pub m4: f64,
    cum_txi: Vec<f64>,
    chi: Vec<f64>,
    pub fourier: MollifierFourier,
}

impl MollifierProfile {
    /// Process-wide shared instance.
    pub fn standard() -> Arc<MollifierProfile> {
        static CELL: OnceLock<Arc<MollifierProfile>> = OnceLock::new();
        CELL.get_or_init(|| Arc::new(MollifierProfile::build())).clone()
    }

    fn build() -> MollifierProfile {
        let raw_mass = 4.0 * std::f64::consts::PI
            * simpson(|r| r * r * bump_raw(r), 0.0, 1.0, XI_QUAD_N);
        let c_xi = 1.0 / raw_mass;
        let xi = move |r: f64| c_xi * bump_raw(r);

        let m2 = 4.0 * std::f64::consts::PI * simpson(|r| r.powi(4) * xi(r), 0.0, 1.0, XI_QUAD_N);
        let m4 = 4.0 * std::f64::consts::PI * simpson(|r| r.powi(6) * xi(r), 0.0, 1.0, XI_QUAD_N);

        let mut cum_txi = vec![0.0; CUM_N + 1];
        let h = 1.0 / CUM_N as f64;
        for i in 0..CUM_N {
            let a = i as f64 * h;
            let m = a + 0.5 * h;
            let b = a + h;
            let inc = (h / 6.0) * (a * xi(a) + 4.0 * m * xi(m) + b * xi(b));
            cum_txi[i + 1] = cum_txi[i] + inc;
        }

        let cum = |t: f64| -> f64 {
            if t <= 0.0 {
                0.0
            } else if t >= 1.0 {
                cum_txi[CUM_N]
            } else {
                catmull_rom(&cum_txi, t * CUM_N as f64)
            }
        };

        let mut chi = vec![0.0; CHI_NODES + 1];
        chi[0] = 4.0 * std::f64::consts::PI * simpson(|s| s * s * xi(s) * xi(s), 0.0, 1.0, XI_QUAD_N);
        let hchi = CHI_SUPPORT / CHI_NODES as f64;
        for (j, slot) in chi.iter_mut().enumerate().skip(1) {
            let r = j as f64 * hchi;
            let integral = simpson(
                |s| s * xi(s) * (cum((r + s).min(1.0)) - cum((r - s).abs())),
                0.0,
                1.0,
                2048,
            );
            *slot = 2.0 * std::f64::consts::PI / r * integral;
        }

        let ln_min = K_TAB_MIN.ln();
        let dln = (K_TAB_MAX.ln() - ln_min) / (K_TAB_N as f64 - 1.0);
        let values: Vec<f64> = (0..K_TAB_N)
            .map(|i| {
                let k = (ln_min + i as f64 * dln).exp();
                4.0 * std::f64::consts::PI
                    * simpson(|r| r * r * xi(r) * sinc(k * r), 0.0, 1.0, XI_QUAD_N)
            })
            .collect();

        MollifierProfile {
            c_xi,
            m2,
            m4,
            cum_txi,
            chi,
            fourier: MollifierFourier::from_raw(values, K_TAB_MIN, K_TAB_MAX, m2, m4),
        }
    }

    /// ξ(r), the normalized radial profile.
    pub fn xi(&self, r: f64) -> f64 {
        self.c_xi * bump_raw(r)
    }

    /// χ(r) = (ξ * ξ)(r), supported on [0, 2].
    pub fn chi(&self, r: f64) -> f64 {
        if r >= CHI_SUPPORT || r < 0.0 {
            return 0.0;
        }
        catmull_rom(&self.chi, r / CHI_SUPPORT * CHI_NODES as f64)
    }

    /// ∫_a^b t ξ(t) dt via the cumulative table.
    pub fn cum_txi(&self, a: f64, b: f64) -> f64 {
        let c = |t: f64| -> f64 {
            if t <= 0.0 {
                0.0
            } else if t >= 1.0 {
                self.cum_txi[CUM_N]
            } else {
                catmull_rom(&self.cum_txi, t * CUM_N as f64)
            }
        };
        c(b) - c(a)
    }

    /// Single-k Fourier value by direct quadrature, independent of the table.
    pub fn xi_fourier_direct(&self, k: f64) -> f64 {
        4.0 * std::f64::consts::PI
            * simpson(|r| r * r * self.xi(r) * sinc(k * r), 0.0, 1.0, 2 * XI_QUAD_N)
    }
}
