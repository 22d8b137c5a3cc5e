//! Three-dimensional FFT on cubic grids, built from 1-D complex transforms
//! applied line by line along each axis.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Box3, GridField};

/// Planned 3-D FFT for an `m^3` cube. Forward transforms are unnormalised;
/// the inverse divides by `m^3`, so `inverse(forward(f)) == f` up to
/// roundoff.
pub struct Fft3 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn transform_axes(&self, data: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        assert_eq!(data.len(), m * m * m);
        let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        // Axis 2 (z): lines are contiguous.
        for line in data.chunks_exact_mut(m) {
            fft.process_with_scratch(line, &mut scratch);
        }
        // Axis 1 (y): stride m within each x-slab.
        let mut buf = vec![Complex::default(); m];
        for ix in 0..m {
            let slab = &mut data[ix * m * m..(ix + 1) * m * m];
            for iz in 0..m {
                for iy in 0..m {
                    buf[iy] = slab[iy * m + iz];
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for iy in 0..m {
                    slab[iy * m + iz] = buf[iy];
                }
            }
        }
        // Axis 0 (x): stride m^2.
        let m2 = m * m;
        for rest in 0..m2 {
            for ix in 0..m {
                buf[ix] = data[ix * m2 + rest];
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for ix in 0..m {
                data[ix * m2 + rest] = buf[ix];
            }
        }
    }

    /// Forward transform of a real field into a full complex cube.
    pub fn forward(&self, field: &GridField) -> Vec<Complex<f64>> {
        assert_eq!(field.grid().m(), self.m);
        let mut data: Vec<Complex<f64>> =
            field.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform_axes(&mut data, &self.fwd);
        data
    }

    /// Forward transform of an arbitrary complex cube in place.
    pub fn forward_complex(&self, data: &mut [Complex<f64>]) {
        self.transform_axes(data, &self.fwd);
    }

    /// Inverse transform; returns the real part as a field on `grid` and
    /// normalises by `m^3`. The imaginary part of a conjugate-symmetric
    /// spectrum is roundoff and is discarded.
    pub fn inverse(&self, mut spec: Vec<Complex<f64>>, grid: Box3) -> GridField {
        assert_eq!(grid.m(), self.m);
        self.transform_axes(&mut spec, &self.inv);
        let norm = 1.0 / (self.m * self.m * self.m) as f64;
        GridField::from_data(grid, spec.iter().map(|c| c.re * norm).collect())
    }

    /// Inverse transform of a complex cube in place (normalised).
    pub fn inverse_complex(&self, data: &mut [Complex<f64>]) {
        self.transform_axes(data, &self.inv);
        let norm = 1.0 / (self.m * self.m * self.m) as f64;
        for c in data.iter_mut() {
            *c *= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trips() {
        let grid = Box3::new(8.0, 16).unwrap();
        let f = GridField::from_fn(grid, |x| {
            (x[0] * 0.9).sin() + (x[1] - 0.2).cos() * (0.5 * x[2]).sin() + 0.1
        });
        let spec = Fft3::new(16).forward(&f);
        let back = Fft3::new(16).inverse(spec, grid);
        let mut worst = 0.0f64;
        for (a, b) in f.data().iter().zip(back.data()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-13, "round trip error {worst}");
    }

    #[test]
    fn forward_of_a_plane_wave_is_a_single_mode() {
        let grid = Box3::new(10.0, 16).unwrap();
        let k = grid.wavenumber(3);
        let f = GridField::from_fn(grid, |x| (k * x[0]).cos());
        let spec = Fft3::new(16).forward(&f);
        // cos splits into modes (3,0,0) and (13,0,0), each of magnitude
        // m^3/2.
        let m3 = 16.0f64.powi(3);
        let hit = spec[grid.flat(3, 0, 0)];
        assert!((hit.norm() - 0.5 * m3).abs() < 1e-6 * m3);
        // Energy elsewhere is negligible.
        let mut leak = 0.0f64;
        for (i, c) in spec.iter().enumerate() {
            if i != grid.flat(3, 0, 0) && i != grid.flat(13, 0, 0) {
                leak = leak.max(c.norm());
            }
        }
        assert!(leak < 1e-8 * m3);
    }
}
