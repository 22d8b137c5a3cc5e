//! Small shared numerics: composite Simpson rules, stable sinc forms and
//! uniform-grid Catmull-Rom interpolation.

/// Composite Simpson over [a, b] with n intervals (rounded up to even).
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + i as f64 * h;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    s += 4.0 * odd + 2.0 * even;
    s * h / 3.0
}

/// Simpson in the substituted variable t = ln s over [a, b], a > 0.
pub(crate) fn simpson_log<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    simpson(|t| {
        let s = t.exp();
        f(s) * s
    }, a.ln(), b.ln(), n)
}

/// sin(x)/x with a series branch near zero.
pub(crate) fn sinc(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// d/dx [sin(x)/x] = (x cos x - sin x)/x^2. The direct form cancels
/// catastrophically for small x (numerator ~ x^3/3 from two O(x) terms),
/// so the series branch extends to |x| < 1e-2 where its truncation error
/// is far below machine precision.
pub(crate) fn sinc_prime(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-2 {
        let x2 = x * x;
        -x / 3.0 + x * x2 / 30.0 - x * x2 * x2 / 840.0
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

/// Catmull-Rom interpolation on a uniform grid given a fractional index `u`
/// into `vals`. Boundary cells use quadratically extrapolated phantom
/// nodes, keeping the accuracy order uniform; values at integer u reproduce
/// the samples exactly.
pub(crate) fn catmull_rom(vals: &[f64], u: f64) -> f64 {
    let n = vals.len();
    debug_assert!(n >= 3);
    let i = (u.floor().max(0.0) as usize).min(n - 2);
    let t = u - i as f64;
    if t == 0.0 {
        return vals[i];
    }
    let p1 = vals[i];
    let p2 = vals[i + 1];
    let p0 = if i == 0 {
        3.0 * vals[0] - 3.0 * vals[1] + vals[2]
    } else {
        vals[i - 1]
    };
    let p3 = if i + 2 > n - 1 {
        3.0 * vals[n - 1] - 3.0 * vals[n - 2] + vals[n - 3]
    } else {
        vals[i + 2]
    };
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}

/// Composite Simpson rule for an array-valued integrand (shared abscissae).
pub(crate) fn simpson_arr<const M: usize, F: Fn(f64) -> [f64; M]>(
    f: F,
    a: f64,
    b: f64,
    n: usize,
) -> [f64; M] {
    if b <= a {
        return [0.0; M];
    }
    let n = (n + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a);
    let fb = f(b);
    for m in 0..M {
        acc[m] += fb[m];
    }
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        let fi = f(a + i as f64 * h);
        for m in 0..M {
            acc[m] += w * fi[m];
        }
    }
    for v in acc.iter_mut() {
        *v *= h / 3.0;
    }
    acc
}

/// `simpson_arr` after the substitution s = e^t (for integrands resolved on
/// a logarithmic scale); requires 0 < a < b.
pub(crate) fn simpson_log_arr<const M: usize, F: Fn(f64) -> [f64; M]>(
    f: F,
    a: f64,
    b: f64,
    n: usize,
) -> [f64; M] {
    assert!(a > 0.0);
    simpson_arr(
        |t| {
            let s = t.exp();
            let mut v = f(s);
            for x in v.iter_mut() {
                *x *= s;
            }
            v
        },
        a.ln(),
        b.ln(),
        n,
    )
}

/// Least-squares line fit; returns (slope, intercept).
pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert!(x.len() == y.len() && x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        let v = simpson(|x| x * x * x, 0.0, 2.0, 16);
        assert!((v - 4.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_log_matches_plain_on_smooth_integrand() {
        let a = simpson(|x| (-x).exp(), 0.5, 4.0, 4096);
        let b = simpson_log(|x| (-x).exp(), 0.5, 4.0, 4096);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn sinc_series_branch_is_continuous() {
        let x = 1.0000001e-4;
        let y = 0.9999999e-4;
        assert!((sinc(x) - sinc(y)).abs() < 1e-12);
        // Series branch vs direct formula (the direct side carries ~1e-13
        // of cancellation noise at these magnitudes).
        for &x in &[2e-3, 5e-3, 9.9e-3_f64] {
            let direct = (x * x.cos() - x.sin()) / (x * x);
            assert!((sinc_prime(x) - direct).abs() < 5e-13);
        }
        // Direct branch vs series evaluated where both are accurate.
        for &x in &[1.1e-2, 2e-2_f64] {
            let x2 = x * x;
            let series = -x / 3.0 + x * x2 / 30.0 - x * x2 * x2 / 840.0;
            assert!((sinc_prime(x) - series).abs() < 1e-14);
        }
    }

    #[test]
    fn catmull_rom_hits_nodes() {
        let vals = [1.0, 4.0, 9.0, 16.0, 25.0];
        for (i, &v) in vals.iter().enumerate() {
            assert_eq!(catmull_rom(&vals, i as f64), v);
        }
        let mid = catmull_rom(&vals, 1.5);
        assert!((mid - 6.25).abs() < 0.3);
    }
}
