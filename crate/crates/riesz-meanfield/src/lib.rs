//! Simulation and verification toolkit for moderately interacting particle
//! systems with attractive or repulsive Riesz potentials.
//!
//! The crate is organised around five modules:
//!
//! * [`kernels`]: mollified Riesz kernels V^η = χ^η * Φ with Φ(x) = |x|^{-λ},
//!   their factorisation V^η = Z^η * Z^η, radial tables and Fourier symbols.
//! * [`fields`]: periodic spectral solvers for the limiting and intermediate
//!   aggregation equations, the backward dual equation and the linearised
//!   equation, plus grid quadrature utilities.
//! * [`particles`]: the coupled pair of interacting and mean-field ensembles
//!   driven by shared Brownian increments (Euler-Maruyama, counter-keyed noise).
//! * [`statistics`]: pairwise-kernel error functionals, law-of-large-numbers
//!   deviation statistics, fluctuation pairings, CLT variance targets and
//!   normality reports, and rate fitting with bootstrap intervals.
//! * [`experiments`]: regime validation against the theorem gates, experiment
//!   orchestration, manifests and file outputs.

pub mod experiments;
pub mod fields;
pub mod kernels;
mod numerics;
pub mod particles;
pub mod rng;
pub mod statistics;

use thiserror::Error;

/// Crate-wide error type. `Config` and `Gate` map to CLI exit code 2,
/// `Numerical` to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("theorem gate violated: {0}")]
    Gate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Deterministic pairwise (cascade) summation. The reduction tree depends
/// only on the slice length, so accumulated sums are reproducible across
/// thread counts and particle orderings of equal length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean via pairwise summation; empty slices return 0.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

/// Deterministic pairwise dot product; the two slices must have equal
/// length.
pub fn pairwise_dot(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    if xs.len() <= 8 {
        let mut s = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            s += x * y;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_dot(&xs[..mid], &ys[..mid]) + pairwise_dot(&xs[mid..], &ys[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_exact_on_ones() {
        let xs = vec![1.0; 12345];
        assert_eq!(pairwise_sum(&xs), 12345.0);
    }
}
