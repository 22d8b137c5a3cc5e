//! Direct real-space quadrature for radial convolutions against power-law
//! kernels. These routines are deliberately independent of the Fourier
//! construction in `reference`: they use only the bipolar-coordinate formula
//!
//!   (f * g)(r) = (2 pi / r) ∫_0^∞ s f(s) [ G(r+s) - G(|r-s|) ] ds,
//!   G(t) = ∫_0^t tau g(tau) dtau,
//!
//! with analytic G for g = |x|^{-mu}. They serve as oracles in the test
//! suite and as the production route for radii beyond the Fourier window.

use super::mollifier::{MollifierProfile, CHI_SUPPORT};
use super::psi_constant;
use crate::numerics::{simpson, simpson_log};

/// (Psi * Psi)(r) for Psi = c_psi |x|^{-(lambda+3)/2}, by splitting the
/// radial integral around the |r-s| cusp (v-substitutions s = r -/+ v^2),
/// a logarithmic piece near zero and a three-term analytic tail.
pub fn psi_conv_psi(r: f64, lambda: f64) -> f64 {
    assert!(r > 0.0 && lambda > 0.0 && lambda < 1.0);
    let mu = 0.5 * (lambda + 3.0);
    let alpha = 2.0 - mu; // exponent of the cumulative G, in (0, 1/2)
    let c = psi_constant(lambda);

    let f = |s: f64| s.powf(1.0 - mu) * ((r + s).powf(alpha) - (r - s).abs().powf(alpha));

    // Analytic head on [0, a]: the integrand is ~ 2 alpha r^{alpha-1} s^{2-mu}.
    let a = 1e-4 * r;
    let binom3 = alpha * (alpha - 1.0) * (alpha - 2.0) / 6.0;
    let head = 2.0 * alpha * r.powf(alpha - 1.0) * a.powf(3.0 - mu) / (3.0 - mu)
        + 2.0 * binom3 * r.powf(alpha - 3.0) * a.powf(5.0 - mu) / (5.0 - mu);

    let smooth_in = simpson_log(f, a, 0.5 * r, 2048);

    // v-substitution pieces across the cusp at s = r.
    let left = simpson(
        |v| 2.0 * v * (r - v * v).powf(1.0 - mu) * ((2.0 * r - v * v).powf(alpha) - v.powf(2.0 * alpha)),
        0.0,
        (0.5 * r).sqrt(),
        8192,
    );
    let right = simpson(
        |v| 2.0 * v * (r + v * v).powf(1.0 - mu) * ((2.0 * r + v * v).powf(alpha) - v.powf(2.0 * alpha)),
        0.0,
        r.sqrt(),
        8192,
    );

    let big_s = 64.0 * r.max(1.0);
    let smooth_out = simpson_log(f, 2.0 * r, big_s, 4096);

    // Tail sum_j 2 binom(alpha, 2j+1) r^{2j+1} S^{-lambda-2j} / (lambda + 2j).
    let binom5 = binom3 * (alpha - 3.0) * (alpha - 4.0) / 20.0;
    let tail = 2.0 * alpha * r * big_s.powf(-lambda) / lambda
        + 2.0 * binom3 * r.powi(3) * big_s.powf(-lambda - 2.0) / (lambda + 2.0)
        + 2.0 * binom5 * r.powi(5) * big_s.powf(-lambda - 4.0) / (lambda + 4.0);

    2.0 * std::f64::consts::PI * c * c / (alpha * r)
        * (head + smooth_in + left + right + smooth_out + tail)
}

/// Integral of s * w(s) * [ (r+s)^alpha - |r-s|^alpha ] over the support
/// [0, sup] of a smooth radial weight w, with v-substitutions around the
/// s = r kink whenever it falls inside the support.
fn conv_power_integral<W: Fn(f64) -> f64>(r: f64, alpha: f64, sup: f64, w: W) -> f64 {
    let g = |s: f64| s * w(s) * ((r + s).powf(alpha) - (r - s).abs().powf(alpha));
    if r >= sup * (1.0 + 1e-12) {
        return simpson(&g, 0.0, sup, 4096);
    }
    let mut acc = 0.0;
    if r > 0.0 {
        acc += simpson(&g, 0.0, 0.5 * r, 2048);
        acc += simpson(
            |v| {
                let s = r - v * v;
                2.0 * v * s * w(s) * ((r + s).powf(alpha) - v.powf(2.0 * alpha))
            },
            0.0,
            (0.5 * r).sqrt(),
            8192,
        );
    }
    let edge = sup.min(2.0 * r);
    if edge > r {
        acc += simpson(
            |v| {
                let s = r + v * v;
                2.0 * v * s * w(s) * ((r + s).powf(alpha) - v.powf(2.0 * alpha))
            },
            0.0,
            (edge - r).sqrt(),
            8192,
        );
    }
    if edge < sup {
        // Log substitution: for r << sup the integrand still carries the
        // s^alpha power behaviour of the kernel difference near s = 0.
        acc += simpson_log(&g, edge, sup, 2048);
    }
    acc
}

/// V-kernel oracle: (chi_eta * Phi)(r) with Phi = |x|^{-lambda} and
/// chi_eta(x) = eta^{-3} chi(|x|/eta).
pub fn chi_conv_phi(r: f64, lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    assert!(r > 0.0);
    let alpha = 2.0 - lambda;
    let sup = CHI_SUPPORT * eta;
    let w = |s: f64| prof.chi(s / eta) / eta.powi(3);
    2.0 * std::f64::consts::PI / (alpha * r) * conv_power_integral(r, alpha, sup, w)
}

/// Z-kernel oracle: (xi_eta * Psi)(r), Psi = c_psi |x|^{-(lambda+3)/2}.
pub fn xi_conv_psi(r: f64, lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    assert!(r > 0.0);
    let mu = 0.5 * (lambda + 3.0);
    let alpha = 2.0 - mu;
    let c = psi_constant(lambda);
    let w = |s: f64| prof.xi(s / eta) / eta.powi(3);
    2.0 * std::f64::consts::PI * c / (alpha * r) * conv_power_integral(r, alpha, eta, w)
}

/// Radial derivative of the V kernel outside the mollifier support
/// (far route only: requires r > 2 eta).
pub fn dv_far(r: f64, lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    let sup = CHI_SUPPORT * eta;
    assert!(r > sup, "far-route derivative requires r > 2 eta");
    let v = chi_conv_phi(r, lambda, eta, prof);
    let alpha = 1.0 - lambda;
    let i1 = simpson(
        |s| s * prof.chi(s / eta) / eta.powi(3) * ((r + s).powf(alpha) - (r - s).powf(alpha)),
        0.0,
        sup,
        4096,
    );
    -v / r + 2.0 * std::f64::consts::PI / r * i1
}

/// Laplacian of the V kernel outside the mollifier support, via
/// Delta Phi = lambda (lambda - 1) |x|^{-lambda-2} away from the origin.
pub fn lapv_far(r: f64, lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    let sup = CHI_SUPPORT * eta;
    assert!(r > sup, "far-route laplacian requires r > 2 eta");
    let i = simpson(
        |s| s * prof.chi(s / eta) / eta.powi(3) * ((r + s).powf(-lambda) - (r - s).powf(-lambda)),
        0.0,
        sup,
        4096,
    );
    2.0 * std::f64::consts::PI * (1.0 - lambda) / r * i
}

/// V(0) = ∫ chi_eta(y) |y|^{-lambda} dy.
pub fn v_at_zero(lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    let sup = CHI_SUPPORT * eta;
    4.0 * std::f64::consts::PI
        * simpson_log(
            |s| s.powf(2.0 - lambda) * prof.chi(s / eta) / eta.powi(3),
            1e-10 * eta,
            sup,
            8192,
        )
}

/// Delta V(0) = lambda (lambda - 1) ∫ chi_eta(y) |y|^{-lambda-2} dy  (< 0).
pub fn lapv_at_zero(lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    let sup = CHI_SUPPORT * eta;
    let a = 1e-6 * eta;
    let chi0 = prof.chi(0.0) / eta.powi(3);
    let head = chi0 * a.powf(1.0 - lambda) / (1.0 - lambda);
    let body = simpson_log(
        |s| s.powf(-lambda) * prof.chi(s / eta) / eta.powi(3),
        a,
        sup,
        8192,
    );
    4.0 * std::f64::consts::PI * lambda * (lambda - 1.0) * (head + body)
}

/// Z(0) = c_psi ∫ xi_eta(y) |y|^{-(lambda+3)/2} dy.
pub fn z_at_zero(lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    let mu = 0.5 * (lambda + 3.0);
    let c = psi_constant(lambda);
    let a = 1e-8 * eta;
    let xi0 = prof.xi(0.0) / eta.powi(3);
    let head = xi0 * a.powf(3.0 - mu) / (3.0 - mu);
    let body = simpson_log(|s| s.powf(2.0 - mu) * prof.xi(s / eta) / eta.powi(3), a, eta, 8192);
    4.0 * std::f64::consts::PI * c * (head + body)
}

/// Squared L^2 norm of the Z kernel by the Plancherel-free real-space route:
/// ||Z_eta||^2 = 4 pi ∫ Z(r)^2 r^2 dr with Z given by `xi_conv_psi`.
pub fn z_l2_sq_direct(lambda: f64, eta: f64, prof: &MollifierProfile) -> f64 {
    let mu = 0.5 * (lambda + 3.0);
    // Z ~ Z(0) near zero and ~ c_psi r^{-mu} far out; 2 mu - 2 > 0 keeps the
    // integrand integrable at both ends.
    let inner = simpson_log(
        |r| r * r * xi_conv_psi(r, lambda, eta, prof).powi(2),
        1e-5 * eta,
        64.0 * eta.max(1.0),
        512,
    );
    let big_s: f64 = 64.0 * eta.max(1.0);
    let c = psi_constant(lambda);
    let tail = c * c * big_s.powf(3.0 - 2.0 * mu) / (2.0 * mu - 3.0);
    let head = xi_conv_psi(1e-5 * eta, lambda, eta, prof).powi(2) * (1e-5 * eta).powi(3) / 3.0;
    4.0 * std::f64::consts::PI * (head + inner + tail)
}
