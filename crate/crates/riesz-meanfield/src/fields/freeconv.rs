//! Free-space convolution of compactly supported grid data with an
//! interaction kernel, via the domain-doubling (Hockney) method.
//!
//! The data cube is zero-padded to twice the box, the kernel is sampled at
//! min-image displacements of the doubled torus, and the cyclic FFT
//! convolution then reproduces the *linear* free-space convolution exactly
//! for all displacements that matter (the data occupies half the padded
//! cube per axis).
//!
//! Point-sampling a kernel with a steep core on the grid incurs a
//! quadrature defect concentrated near the origin. For even kernels the
//! leading defect couples to the local value of the convolved density, so
//! it can be removed exactly to that order by adjusting the zero-distance
//! kernel weight: we compare the windowed lattice sum of the kernel with
//! the corresponding radial integral and subtract the difference.

use rustfft::num_complex::Complex;

use super::fft::Fft3;
use super::{Box3, GridField};
use crate::numerics::simpson;
use crate::Result;

/// Smooth bump window, 1 at the origin, vanishing to all orders at `r = R`.
fn window(r: f64, radius: f64) -> f64 {
    let t = r / radius;
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Quadrature defect of the lattice point-sampling of a radial kernel:
/// `h^3 sum_j w(|x_j|) K(|x_j|) - int w(|x|) K(|x|) dx`.
fn zero_cell_defect(kernel: &dyn Fn(f64) -> f64, h: f64, radius: f64) -> f64 {
    let half = (radius / h).ceil() as i64;
    let mut lattice = 0.0;
    for jx in -half..=half {
        for jy in -half..=half {
            for jz in -half..=half {
                let r = h * ((jx * jx + jy * jy + jz * jz) as f64).sqrt();
                let w = window(r, radius);
                if w > 0.0 {
                    lattice += w * kernel(r);
                }
            }
        }
    }
    let integral = 4.0
        * std::f64::consts::PI
        * simpson(&|r: f64| r * r * window(r, radius) * kernel(r), 0.0, radius, 8192);
    lattice * h * h * h - integral
}

/// A planned free-space convolver for one kernel on one grid.
pub struct FreeConvolver {
    grid: Box3,
    padded: Box3,
    fft: Fft3,
    /// FFT of the padded kernel cube.
    khat: Vec<Complex<f64>>,
}

impl FreeConvolver {
    fn from_kernel_cube(grid: Box3, mut kcube: Vec<Complex<f64>>) -> Result<Self> {
        let padded = Box3::new(2.0 * grid.length(), 2 * grid.m())?;
        let fft = Fft3::new(padded.m());
        fft.forward_complex(&mut kcube);
        Ok(Self { grid, padded, fft, khat: kcube })
    }

    fn kernel_cube(grid: Box3, kernel: impl Fn([f64; 3]) -> f64) -> Vec<Complex<f64>> {
        let p = 2 * grid.m();
        let h = grid.h();
        let signed = |i: usize| -> f64 {
            let s = if i <= p / 2 { i as i64 } else { i as i64 - p as i64 };
            h * s as f64
        };
        let mut cube = Vec::with_capacity(p * p * p);
        for ix in 0..p {
            let dx = signed(ix);
            for iy in 0..p {
                let dy = signed(iy);
                for iz in 0..p {
                    cube.push(Complex::new(kernel([dx, dy, signed(iz)]), 0.0));
                }
            }
        }
        cube
    }

    /// Convolver for a radial kernel. When `defect_window` is given, the
    /// zero-cell weight is corrected by the windowed lattice-vs-integral
    /// defect over that radius (recommended: a few kernel widths, well
    /// inside the box).
    pub fn new_radial(
        grid: Box3,
        kernel: impl Fn(f64) -> f64,
        defect_window: Option<f64>,
    ) -> Result<Self> {
        let mut cube = Self::kernel_cube(grid, |d| {
            kernel((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
        });
        if let Some(radius) = defect_window {
            assert!(radius > grid.h() && radius <= 0.45 * grid.length());
            let d = zero_cell_defect(&kernel, grid.h(), radius);
            cube[0] -= d / grid.cell_volume();
        }
        Self::from_kernel_cube(grid, cube)
    }

    /// Convolver for a general (e.g. odd, vector-component) kernel; no
    /// zero-cell correction is applied.
    pub fn new_vector(grid: Box3, kernel: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let cube = Self::kernel_cube(grid, kernel);
        Self::from_kernel_cube(grid, cube)
    }

    /// Apply the convolution to a field on the data grid.
    pub fn apply(&self, f: &GridField) -> GridField {
        assert_eq!(f.grid(), self.grid);
        let m = self.grid.m();
        let p = self.padded.m();
        let mut buf = vec![Complex::default(); p * p * p];
        for ix in 0..m {
            for iy in 0..m {
                let src = (ix * m + iy) * m;
                let dst = (ix * p + iy) * p;
                for iz in 0..m {
                    buf[dst + iz] = Complex::new(f.data()[src + iz], 0.0);
                }
            }
        }
        self.fft.forward_complex(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.khat) {
            *b *= *k;
        }
        self.fft.inverse_complex(&mut buf);
        let scale = self.grid.cell_volume();
        let mut out = Vec::with_capacity(self.grid.size());
        for ix in 0..m {
            for iy in 0..m {
                let src = (ix * p + iy) * p;
                for iz in 0..m {
                    out.push(buf[src + iz].re * scale);
                }
            }
        }
        GridField::from_data(self.grid, out)
    }
}

/// Spectral interpolation of a field onto the doubled grid (same box, twice
/// the resolution per axis). Exact for band-limited data.
pub fn refine_double(f: &GridField) -> Result<GridField> {
    let grid = f.grid();
    let m = grid.m();
    let fine = Box3::new(grid.length(), 2 * m)?;
    let coarse_fft = Fft3::new(m);
    let fine_fft = Fft3::new(2 * m);
    let spec = coarse_fft.forward(f);
    let mut out = vec![Complex::default(); fine.size()];
    let p = 2 * m;
    let splits: Vec<Targets> = (0..m).map(|i| split_index(i, m, p)).collect();
    for ix in 0..m {
        let tx = &splits[ix];
        for iy in 0..m {
            let ty = &splits[iy];
            for iz in 0..m {
                let tz = &splits[iz];
                let v = spec[(ix * m + iy) * m + iz] * 8.0;
                for &(jx, fx) in tx.slots() {
                    for &(jy, fy) in ty.slots() {
                        for &(jz, fz) in tz.slots() {
                            out[(jx * p + jy) * p + jz] += v * (fx * fy * fz);
                        }
                    }
                }
            }
        }
    }
    Ok(fine_fft.inverse(out, fine))
}

/// Fine-grid targets of one coarse FFT index: usually a single index with
/// weight 1; the Nyquist plane (|mode| = m/2) is split evenly between
/// +m/2 and -m/2.
struct Targets {
    slots: [(usize, f64); 2],
    count: usize,
}

impl Targets {
    fn slots(&self) -> &[(usize, f64)] {
        &self.slots[..self.count]
    }
}

fn split_index(i: usize, m: usize, p: usize) -> Targets {
    let s = if i <= m / 2 { i as i64 } else { i as i64 - m as i64 };
    if s.unsigned_abs() as usize == m / 2 {
        Targets { slots: [(m / 2, 0.5), (p - m / 2, 0.5)], count: 2 }
    } else {
        let t = if s >= 0 { s as usize } else { (s + p as i64) as usize };
        Targets { slots: [(t, 1.0), (t, 0.0)], count: 1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refinement_is_exact_for_band_limited_fields() {
        let grid = Box3::new(8.0, 16).unwrap();
        let k1 = grid.wavenumber(2);
        let k2 = grid.wavenumber(3);
        let f = |x: [f64; 3]| (k1 * x[0]).cos() * (k2 * x[1]).sin() + 0.3 * (k1 * x[2]).sin();
        let coarse = GridField::from_fn(grid, f);
        let fine = refine_double(&coarse).unwrap();
        let fg = fine.grid();
        assert_eq!(fg.m(), 32);
        let mut worst = 0.0f64;
        for &(ix, iy, iz) in &[(1usize, 2usize, 3usize), (9, 30, 17), (31, 0, 8)] {
            let x = [fg.node(ix), fg.node(iy), fg.node(iz)];
            worst = worst.max((fine.data()[fg.flat(ix, iy, iz)] - f(x)).abs());
        }
        assert!(worst < 1e-12, "refinement error {worst}");
    }

    #[test]
    fn window_is_one_at_origin_and_vanishes_at_radius() {
        assert!((window(0.0, 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(window(2.0, 2.0), 0.0);
        assert!(window(1.99, 2.0) < 1e-40);
        // Monotone decrease on a few sample points.
        let mut prev = 1.0;
        for i in 1..20 {
            let w = window(0.1 * i as f64, 2.0);
            assert!(w <= prev);
            prev = w;
        }
    }
}
