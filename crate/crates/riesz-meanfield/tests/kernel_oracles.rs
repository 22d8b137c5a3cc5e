//! Oracle tests for the kernel module: every production route (Fourier
//! construction, rescaled tables, symbols, flattened pair tables) is checked
//! against an independently coded real-space quadrature or a closed-form
//! identity, at frozen tolerances.

use std::sync::Arc;

use riesz_meanfield::kernels::{
    self, build_kernel_set, fourier_constant, psi_constant, quadrature, riesz_phi,
    MollifierProfile, PairTable,
};

#[test]
fn half_kernel_factorization_recovers_phi() {
    // Psi * Psi = Phi with Psi = c_psi |x|^{-(lambda+3)/2}: the quadrature
    // oracle must reproduce the bare Riesz kernel across four decades.
    for &lambda in &[0.5, 0.9] {
        for i in 0..=24 {
            let r = 0.05 * (20.0f64 / 0.05).powf(i as f64 / 24.0);
            let got = quadrature::psi_conv_psi(r, lambda);
            let want = riesz_phi(r, lambda);
            let rel = (got - want).abs() / want;
            assert!(rel < 1e-4, "lambda={lambda} r={r} rel={rel}");
        }
    }
}

#[test]
fn riesz_symbol_constant_satisfies_the_reflection_identity() {
    // For 0 < s < 2 (s != 1) the radial transform can be done by a direct
    // one-dimensional formula: C(s) = 4 pi Gamma(2-s) sin(pi (2-s) / 2).
    for &s in &[0.3, 0.5, 0.9, 1.3, 1.7] {
        let gamma = statrs::function::gamma::gamma(2.0 - s);
        let alt = 4.0 * std::f64::consts::PI
            * gamma
            * (std::f64::consts::PI * (2.0 - s) / 2.0).sin();
        let c = fourier_constant(s);
        assert!(
            ((c - alt) / alt).abs() < 1e-12,
            "s={s}: {c} vs {alt}"
        );
    }
}

#[test]
fn kernel_tables_match_the_real_space_oracle() {
    let prof = MollifierProfile::standard();
    for &(lambda, eta) in &[(0.5, 0.7), (0.5, 0.2), (0.9, 1.0)] {
        let set = build_kernel_set(lambda, eta).unwrap();
        for &x in &[0.03, 0.3, 0.9, 1.4, 2.5, 8.0] {
            let r = x * eta;
            let v = set.eval_v(r);
            let vo = quadrature::chi_conv_phi(r, lambda, eta, &prof);
            assert!(
                ((v - vo) / vo).abs() < 2e-5,
                "V lambda={lambda} eta={eta} r={r}: {v} vs {vo}"
            );
            let z = set.eval_z(r);
            let zo = quadrature::xi_conv_psi(r, lambda, eta, &prof);
            assert!(
                ((z - zo) / zo).abs() < 2e-5,
                "Z lambda={lambda} eta={eta} r={r}: {z} vs {zo}"
            );
        }
        // Far-field derivative and laplacian against the direct route.
        for &x in &[2.4, 5.0, 30.0] {
            let r = x * eta;
            let dv = set.eval_dv(r);
            let dvo = quadrature::dv_far(r, lambda, eta, &prof);
            assert!(((dv - dvo) / dvo).abs() < 2e-5, "dV at r={r}");
            let lap = set.eval_lapv(r);
            let lapo = quadrature::lapv_far(r, lambda, eta, &prof);
            assert!(((lap - lapo) / lapo).abs() < 5e-5, "lapV at r={r}");
        }
        // Values at zero distance against the closed-form integrals.
        let v0 = quadrature::v_at_zero(lambda, eta, &prof);
        assert!(((set.eval_v(0.0) - v0) / v0).abs() < 1e-6);
        let z0 = quadrature::z_at_zero(lambda, eta, &prof);
        assert!(((set.eval_z(0.0) - z0) / z0).abs() < 1e-6);
        let l0 = quadrature::lapv_at_zero(lambda, eta, &prof);
        assert!(((set.eval_lapv(0.0) - l0) / l0).abs() < 1e-5);
    }
}

#[test]
fn derivative_tables_are_consistent_with_value_tables() {
    let set = build_kernel_set(0.5, 0.6).unwrap();
    for &r in &[0.1, 0.35, 0.8, 1.5, 4.0, 20.0] {
        let h = 5e-3 * r;
        let fd = (set.eval_v(r + h) - set.eval_v(r - h)) / (2.0 * h);
        let dv = set.eval_dv(r);
        assert!(
            ((fd - dv) / dv).abs() < 1e-4,
            "r={r}: fd {fd} vs table {dv}"
        );
        // Radial laplacian: V'' + 2 V'/r by second differences of V. A
        // five-point stencil with a generous step keeps the 1/h^2
        // amplification of table interpolation noise below the tolerance
        // while the fourth-order truncation stays negligible.
        let h2 = 3e-2 * r;
        let d2 = (-set.eval_v(r + 2.0 * h2) + 16.0 * set.eval_v(r + h2) - 30.0 * set.eval_v(r)
            + 16.0 * set.eval_v(r - h2)
            - set.eval_v(r - 2.0 * h2))
            / (12.0 * h2 * h2);
        let lap = d2 + 2.0 * dv / r;
        let tab = set.eval_lapv(r);
        let scale = set.eval_lapv(0.0).abs();
        assert!(
            (lap - tab).abs() < 1e-3 * tab.abs().max(1e-4 * scale),
            "lap at r={r}: {lap} vs {tab}"
        );
    }
}

#[test]
fn mollified_kernel_is_dominated_by_phi_and_converges_to_it() {
    let set_big = build_kernel_set(0.5, 0.8).unwrap();
    let set_small = build_kernel_set(0.5, 0.1).unwrap();
    for i in 0..60 {
        let r = 0.02 * (30.0f64 / 0.02).powf(i as f64 / 59.0);
        let phi = riesz_phi(r, 0.5);
        assert!(set_big.eval_v(r) <= phi * (1.0 + 1e-9), "domination at r={r}");
        // Mollification only moves mass outward: smaller eta is closer to Phi.
        let gap_big = phi - set_big.eval_v(r);
        let gap_small = phi - set_small.eval_v(r);
        assert!(
            gap_small <= gap_big * (1.0 + 1e-6) + 1e-12 * phi,
            "monotone mollification at r={r}"
        );
    }
    // Twenty mollification radii out, the kernel is within 1% of Phi.
    let r = 20.0 * 0.8;
    assert!((set_big.eval_v(r) - riesz_phi(r, 0.5)).abs() < 1e-2 * riesz_phi(r, 0.5));
}

#[test]
fn gradient_is_exactly_antisymmetric() {
    let set = build_kernel_set(0.5, 0.7).unwrap();
    for &x in &[[0.3, -0.1, 0.2], [1.0, 2.0, -0.5], [-3.0, 0.0, 0.0]] {
        let g = set.eval_grad(x);
        let gn = set.eval_grad([-x[0], -x[1], -x[2]]);
        for a in 0..3 {
            assert_eq!(g[a], -gn[a], "component {a} of grad at {x:?}");
        }
    }
}

#[test]
fn symbols_are_nonnegative_and_factor() {
    let set = build_kernel_set(0.5, 0.9).unwrap();
    for i in 0..200 {
        let k = 1e-2 * (400.0f64 / 1e-2).powf(i as f64 / 199.0);
        let sv = set.symbol_v(k);
        let sz = set.symbol_z(k);
        assert!(sv >= 0.0, "symbol of V must be nonnegative at k={k}");
        assert!(
            (sz * sz - sv).abs() <= 1e-12 * sv.abs().max(1e-300),
            "symbol factorization at k={k}"
        );
    }
}

#[test]
fn z_norm_from_tables_matches_direct_quadrature() {
    let prof = MollifierProfile::standard();
    let set = build_kernel_set(0.5, 0.7).unwrap();
    let direct = quadrature::z_l2_sq_direct(0.5, 0.7, &prof).sqrt();
    let tab = set.z_l2();
    assert!(
        ((tab - direct) / direct).abs() < 1e-3,
        "{tab} vs {direct}"
    );
}

#[test]
fn kernel_set_round_trips_through_disk_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kernel.txt");
    let set = build_kernel_set(0.5, 0.66).unwrap();
    set.save(&path).unwrap();
    let back = kernels::RadialKernelSet::load(&path).unwrap();
    assert_eq!(set.lambda.to_bits(), back.lambda.to_bits());
    assert_eq!(set.eta.to_bits(), back.eta.to_bits());
    for &r in &[0.0, 1e-4, 0.037, 0.9, 3.3, 55.0, 200.0] {
        assert_eq!(set.eval_v(r).to_bits(), back.eval_v(r).to_bits(), "v at {r}");
        assert_eq!(set.eval_dv(r).to_bits(), back.eval_dv(r).to_bits(), "dv at {r}");
        assert_eq!(set.eval_lapv(r).to_bits(), back.eval_lapv(r).to_bits(), "lapv at {r}");
        assert_eq!(set.eval_z(r).to_bits(), back.eval_z(r).to_bits(), "z at {r}");
    }
    // Corruption must be detected.
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.replace_range(200..201, if &text[200..201] == "0" { "1" } else { "0" });
    std::fs::write(&path, text).unwrap();
    assert!(kernels::RadialKernelSet::load(&path).is_err());
}

#[test]
fn pair_table_agrees_with_kernel_set_everywhere() {
    let set = Arc::new(build_kernel_set(0.5, 0.73).unwrap());
    let table = PairTable::new(set.clone());
    let v0 = set.eval_v(0.0);
    let g0 = set.grad_coeff(0.0).abs();
    let l0 = set.eval_lapv(0.0).abs();
    for i in 0..=3000 {
        let r = 16.0 * i as f64 / 3000.0;
        let (g, v, lap) = table.eval(r * r);
        assert!((v - set.eval_v(r)).abs() < 2e-6 * v0, "v at r={r}");
        assert!((g - set.grad_coeff(r)).abs() < 2e-6 * g0, "g at r={r}");
        assert!((lap - set.eval_lapv(r)).abs() < 2e-6 * l0, "lap at r={r}");
    }
}

#[test]
fn rescaling_is_exact_across_widths() {
    // V_eta(r) = eta^{-lambda} V_1(r/eta) holds to rounding because widths
    // share one reference build.
    let lambda = 0.9;
    let a = build_kernel_set(lambda, 1.0).unwrap();
    let b = build_kernel_set(lambda, 0.25).unwrap();
    for &r in &[0.01, 0.2, 1.1, 7.0] {
        let lhs = b.eval_v(r);
        let rhs = 0.25f64.powf(-lambda) * a.eval_v(r / 0.25);
        assert!(
            (lhs - rhs).abs() <= 1e-12 * rhs.abs(),
            "r={r}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn scaling_slopes_match_moderate_regime_theory() {
    // Quick version on a short schedule; the acceptance suite runs the
    // full range.
    let report =
        kernels::scaling::scaling_report(0.5, 0.05, &[1 << 10, 1 << 12, 1 << 14, 1 << 16])
            .unwrap();
    assert!(
        report.worst_relative_error() < 0.1,
        "slopes {:?} vs expected {:?}",
        [report.slope_v, report.slope_dv, report.slope_lapv, report.slope_z],
        report.expected
    );
}

#[test]
fn psi_constant_is_positive_and_scales_photometrically() {
    for &lambda in &[0.2, 0.5, 0.9] {
        assert!(psi_constant(lambda) > 0.0);
        // Scaling identity of the bare kernel.
        let r: f64 = 1.7;
        let a: f64 = 3.0;
        let lhs = riesz_phi(a * r, lambda);
        let rhs = a.powf(-lambda) * riesz_phi(r, lambda);
        assert!((lhs - rhs).abs() < 1e-14 * rhs);
    }
}
