//! Periodic grids, grid fields, and spectral machinery for the nonlocal
//! PDE solvers.
//!
//! The solution is represented on a uniform periodic grid over the cube
//! `[-L/2, L/2)^3`. Spectral operations (diffusion, interaction drift,
//! dealiasing) act on the complex FFT representation; all observable
//! quantities live on the real grid.

pub mod dual;
pub mod fft;
pub mod freeconv;
pub mod solver;

pub use dual::{backward_dual, forward_linearized, grad_norm_sq, spectral_gradient};
pub use fft::Fft3;
pub use freeconv::{refine_double, FreeConvolver};
pub use solver::{drift_at, run_forward, Interaction, PdeParams, Trajectory};

use crate::{pairwise_dot, pairwise_sum, Error, Result};

/// A uniform periodic grid over the cube `[-L/2, L/2)^3` with `m` nodes per
/// axis: node `i` sits at `-L/2 + i h` with `h = L / m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Box3 {
    length: f64,
    m: usize,
}

impl Box3 {
    pub fn new(length: f64, m: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("box length must be positive, got {length}")));
        }
        if m < 8 || m % 2 != 0 {
            return Err(Error::Config(format!(
                "grid resolution must be an even integer >= 8, got {m}"
            )));
        }
        Ok(Self { length, m })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Grid spacing.
    pub fn h(&self) -> f64 {
        self.length / self.m as f64
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(3)
    }

    pub fn size(&self) -> usize {
        self.m * self.m * self.m
    }

    /// Coordinate of node `i` along one axis.
    pub fn node(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.h()
    }

    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.m + iy) * self.m + iz
    }

    /// Signed integer mode for FFT index `i` (`0..m` maps to `-m/2..m/2`).
    pub fn signed_mode(&self, i: usize) -> i64 {
        if i <= self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Angular wavenumber for FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.signed_mode(i) as f64 / self.length
    }

    /// Wrap a coordinate into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length;
        let y = (x + 0.5 * l).rem_euclid(l) - 0.5 * l;
        // rem_euclid can return exactly `l` for inputs just below a period
        // boundary; fold that back onto the canonical interval.
        if y >= 0.5 * l {
            y - l
        } else {
            y
        }
    }
}

/// A real scalar field sampled on a [`Box3`] grid, flattened x-major.
#[derive(Clone, Debug)]
pub struct GridField {
    grid: Box3,
    data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Box3) -> Self {
        Self { grid, data: vec![0.0; grid.size()] }
    }

    pub fn from_fn(grid: Box3, f: impl Fn([f64; 3]) -> f64) -> Self {
        let m = grid.m();
        let mut data = Vec::with_capacity(grid.size());
        for ix in 0..m {
            let x = grid.node(ix);
            for iy in 0..m {
                let y = grid.node(iy);
                for iz in 0..m {
                    data.push(f([x, y, grid.node(iz)]));
                }
            }
        }
        Self { grid, data }
    }

    /// Isotropic Gaussian with the given standard deviation, normalised to
    /// unit mass over the box.
    pub fn gaussian(grid: Box3, std: f64) -> Result<Self> {
        if !(std.is_finite() && std > 0.0) {
            return Err(Error::Config(format!("gaussian width must be positive, got {std}")));
        }
        let inv = 0.5 / (std * std);
        let mut field = Self::from_fn(grid, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) * inv).exp()
        });
        let mass = field.mass();
        for v in &mut field.data {
            *v /= mass;
        }
        Ok(field)
    }

    pub fn grid(&self) -> Box3 {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn from_data(grid: Box3, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.size());
        Self { grid, data }
    }

    /// Total mass `h^3 sum(u)`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * pairwise_sum(&self.data)
    }

    /// Grid inner product `h^3 <f, g>`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * pairwise_dot(&self.data, &other.data)
    }

    /// `L^p` norm under the grid quadrature (finite `p >= 1`).
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0 && p.is_finite());
        let powed: Vec<f64> = self.data.iter().map(|v| v.abs().powf(p)).collect();
        (self.grid.cell_volume() * pairwise_sum(&powed)).powf(1.0 / p)
    }

    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }

    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        assert_eq!(self.grid, other.grid);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    /// Pointwise product into a new field.
    pub fn pointwise_mul(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Self { grid: self.grid, data }
    }

    /// Largest |u| over nodes whose max-coordinate magnitude is at least
    /// `radius` along some axis (used for decay checks near the boundary).
    pub fn max_abs_outside(&self, radius: f64) -> f64 {
        let m = self.grid.m();
        let mut best = 0.0f64;
        for ix in 0..m {
            let xo = self.grid.node(ix).abs() >= radius;
            for iy in 0..m {
                let yo = self.grid.node(iy).abs() >= radius;
                for iz in 0..m {
                    if xo || yo || self.grid.node(iz).abs() >= radius {
                        best = best.max(self.data[self.grid.flat(ix, iy, iz)].abs());
                    }
                }
            }
        }
        best
    }

    /// Periodic trilinear sampling at an arbitrary point; the point is
    /// wrapped into the box first.
    pub fn sample_trilinear(&self, x: [f64; 3]) -> f64 {
        let m = self.grid.m();
        let h = self.grid.h();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let u = (self.grid.wrap(x[a]) + 0.5 * self.grid.length()) / h;
            let i0 = u.floor();
            frac[a] = u - i0;
            base[a] = ((i0 as i64).rem_euclid(m as i64)) as usize;
        }
        let nxt = |b: usize| (b + 1) % m;
        let (ix0, iy0, iz0) = (base[0], base[1], base[2]);
        let (ix1, iy1, iz1) = (nxt(ix0), nxt(iy0), nxt(iz0));
        let (tx, ty, tz) = (frac[0], frac[1], frac[2]);
        let mut acc = 0.0;
        for (ix, wx) in [(ix0, 1.0 - tx), (ix1, tx)] {
            for (iy, wy) in [(iy0, 1.0 - ty), (iy1, ty)] {
                let row = (ix * m + iy) * m;
                acc += wx
                    * wy
                    * ((1.0 - tz) * self.data[row + iz0] + tz * self.data[row + iz1]);
            }
        }
        acc
    }

    /// Periodic tricubic (Catmull-Rom tensor product) sampling at an
    /// arbitrary point; the point is wrapped into the box first.
    pub fn sample_tricubic(&self, x: [f64; 3]) -> f64 {
        let m = self.grid.m();
        let h = self.grid.h();
        let mut base = [0usize; 3];
        let mut w = [[0.0f64; 4]; 3];
        for a in 0..3 {
            let u = (self.grid.wrap(x[a]) + 0.5 * self.grid.length()) / h;
            let i0 = u.floor();
            let t = u - i0;
            // Catmull-Rom cardinal weights for nodes i0-1 .. i0+2.
            let t2 = t * t;
            let t3 = t2 * t;
            w[a][0] = -0.5 * t + t2 - 0.5 * t3;
            w[a][1] = 1.0 - 2.5 * t2 + 1.5 * t3;
            w[a][2] = 0.5 * t + 2.0 * t2 - 1.5 * t3;
            w[a][3] = -0.5 * t2 + 0.5 * t3;
            base[a] = ((i0 as i64).rem_euclid(m as i64)) as usize;
        }
        let idx = |b: usize, o: usize| (b + m - 1 + o) % m;
        let mut acc = 0.0;
        for (ox, wx) in w[0].iter().enumerate() {
            let ix = idx(base[0], ox);
            for (oy, wy) in w[1].iter().enumerate() {
                let iy = idx(base[1], oy);
                let wxy = wx * wy;
                let row = (ix * m + iy) * m;
                for (oz, wz) in w[2].iter().enumerate() {
                    acc += wxy * wz * self.data[row + idx(base[2], oz)];
                }
            }
        }
        acc
    }
}

/// Trilinear sample of a vector field (three scalar components) at `x`.
pub fn sample_vector(fields: &[GridField; 3], x: [f64; 3]) -> [f64; 3] {
    [
        fields[0].sample_trilinear(x),
        fields[1].sample_trilinear(x),
        fields[2].sample_trilinear(x),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trilinear_sampling_is_exact_on_nodes_and_second_order() {
        let f = |x: [f64; 3]| (-0.3 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
        let b = Box3::new(16.0, 64).unwrap();
        let g = GridField::from_fn(b, f);
        let x_node = [b.node(40), b.node(12), b.node(55)];
        assert!((g.sample_trilinear(x_node) - g.data()[b.flat(40, 12, 55)]).abs() < 1e-15);
        let worst_at = |m: usize| {
            let g = GridField::from_fn(Box3::new(16.0, m).unwrap(), f);
            let mut worst = 0.0f64;
            for i in 0..100u64 {
                let s = crate::rng::splitmix64(&mut { i + 3 }) as f64 / u64::MAX as f64;
                let t = crate::rng::splitmix64(&mut { i + 103 }) as f64 / u64::MAX as f64;
                let u = crate::rng::splitmix64(&mut { i + 203 }) as f64 / u64::MAX as f64;
                let x = [4.0 * s - 2.0, 4.0 * t - 2.0, 4.0 * u - 2.0];
                worst = worst.max((g.sample_trilinear(x) - f(x)).abs());
            }
            worst
        };
        let coarse = worst_at(64);
        let fine = worst_at(128);
        assert!(fine < coarse / 3.0, "no second-order gain: {coarse} -> {fine}");
    }

    #[test]
    fn wrap_maps_into_the_half_open_box() {
        let b = Box3::new(16.0, 16).unwrap();
        assert_eq!(b.wrap(8.0), -8.0);
        assert_eq!(b.wrap(-8.0), -8.0);
        assert!((b.wrap(8.1) - (-7.9)).abs() < 1e-12);
        assert!((b.wrap(24.5) - (-7.5)).abs() < 1e-12);
        for &x in &[1e9, -1e9, 123.456, -0.0001] {
            let y = b.wrap(x);
            assert!((-8.0..8.0).contains(&y), "wrap({x}) = {y}");
        }
    }

    #[test]
    fn gaussian_field_has_unit_mass_and_decays() {
        let b = Box3::new(16.0, 32).unwrap();
        let g = GridField::gaussian(b, 1.0).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
        assert!(g.max_abs_outside(7.5) < 1e-12 * g.linf_norm());
    }

    #[test]
    fn tricubic_sampling_reproduces_smooth_fields_at_third_order() {
        let f = |x: [f64; 3]| {
            (-0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
                * (1.0 + 0.3 * (0.7 * x[0]).sin())
        };
        let worst_at = |m: usize| {
            let g = GridField::from_fn(Box3::new(16.0, m).unwrap(), f);
            let mut worst = 0.0f64;
            for i in 0..200u64 {
                let s = crate::rng::splitmix64(&mut { i + 7 }) as f64 / u64::MAX as f64;
                let t = crate::rng::splitmix64(&mut { i + 1007 }) as f64 / u64::MAX as f64;
                let u = crate::rng::splitmix64(&mut { i + 2007 }) as f64 / u64::MAX as f64;
                let x = [6.0 * s - 3.0, 6.0 * t - 3.0, 6.0 * u - 3.0];
                worst = worst.max((g.sample_tricubic(x) - f(x)).abs());
            }
            worst
        };
        let coarse = worst_at(64);
        let fine = worst_at(128);
        assert!(coarse < 1e-3, "tricubic error {coarse}");
        // Third-order accuracy: halving the spacing gains roughly 8x.
        assert!(fine < coarse / 5.0, "no order gain: {coarse} -> {fine}");
    }

    #[test]
    fn tricubic_is_exact_on_grid_nodes() {
        let b = Box3::new(8.0, 16).unwrap();
        let g = GridField::from_fn(b, |x| x[0].sin() + 0.5 * (x[1] - 0.3).cos() + 0.1 * x[2]);
        for &(ix, iy, iz) in &[(0usize, 0usize, 0usize), (3, 7, 11), (15, 15, 15), (8, 1, 5)] {
            let x = [b.node(ix), b.node(iy), b.node(iz)];
            let v = g.data()[b.flat(ix, iy, iz)];
            assert!((g.sample_tricubic(x) - v).abs() < 1e-13);
        }
    }
}
