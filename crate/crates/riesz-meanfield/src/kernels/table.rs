//! Log-spaced radial lookup tables with parity-aware extension below the
//! first node and a power-law tail above the last one. Interpolation is
//! cubic (Catmull-Rom) in ln r, exact at the nodes.

use crate::numerics::catmull_rom;

/// Behaviour of a radial profile near the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// f(r) = f(0) + O(r^2); modelled as f(0) + (f(r_min) - f(0)) (r/r_min)^2.
    Even,
    /// f(r) = f'(0) r + O(r^3); modelled as f(r_min) (r/r_min).
    Odd,
}

/// A radial profile sampled on a logarithmic grid.
#[derive(Debug, Clone)]
pub struct RadialTable {
    pub r_min: f64,
    pub r_max: f64,
    values: Vec<f64>,
    ln_r_min: f64,
    inv_dln: f64,
    parity: Parity,
    /// Exact value at r = 0 (for `Parity::Even`; zero for odd profiles).
    value_at_zero: f64,
    /// Above r_max the profile is tail_coeff * r^{-tail_exp}.
    tail_exp: f64,
    tail_coeff: f64,
}

impl RadialTable {
    pub fn new(
        r_min: f64,
        r_max: f64,
        values: Vec<f64>,
        parity: Parity,
        value_at_zero: f64,
        tail_exp: f64,
    ) -> RadialTable {
        assert!(r_min > 0.0 && r_max > r_min && values.len() >= 4);
        let ln_r_min = r_min.ln();
        let inv_dln = (values.len() as f64 - 1.0) / (r_max.ln() - ln_r_min);
        let tail_coeff = values[values.len() - 1] * r_max.powf(tail_exp);
        RadialTable {
            r_min,
            r_max,
            values,
            ln_r_min,
            inv_dln,
            parity,
            value_at_zero,
            tail_exp,
            tail_coeff,
        }
    }

    /// Sample `f` on the grid and build the table.
    pub fn from_fn<F: Fn(f64) -> f64>(
        f: F,
        r_min: f64,
        r_max: f64,
        n: usize,
        parity: Parity,
        value_at_zero: f64,
        tail_exp: f64,
    ) -> RadialTable {
        let ln_min = r_min.ln();
        let dln = (r_max.ln() - ln_min) / (n as f64 - 1.0);
        let values = (0..n).map(|i| f((ln_min + i as f64 * dln).exp())).collect();
        RadialTable::new(r_min, r_max, values, parity, value_at_zero, tail_exp)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return match self.parity {
                Parity::Even => self.value_at_zero,
                Parity::Odd => 0.0,
            };
        }
        if r < self.r_min {
            let t = r / self.r_min;
            return match self.parity {
                Parity::Even => self.value_at_zero + (self.values[0] - self.value_at_zero) * t * t,
                Parity::Odd => self.values[0] * t,
            };
        }
        if r >= self.r_max {
            return self.tail_coeff * r.powf(-self.tail_exp);
        }
        catmull_rom(&self.values, (r.ln() - self.ln_r_min) * self.inv_dln)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node_radius(&self, i: usize) -> f64 {
        (self.ln_r_min + i as f64 / self.inv_dln).exp()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    pub fn tail_exp(&self) -> f64 {
        self.tail_exp
    }

    /// The table for eta * this profile's radius scaling:
    /// g(r) = amplitude * f(r / eta). Node values are reused exactly.
    pub fn rescaled(&self, eta: f64, amplitude: f64) -> RadialTable {
        assert!(eta > 0.0);
        let values: Vec<f64> = self.values.iter().map(|v| amplitude * v).collect();
        RadialTable::new(
            self.r_min * eta,
            self.r_max * eta,
            values,
            self.parity,
            amplitude * self.value_at_zero,
            self.tail_exp,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_nodes_and_accurate_between() {
        let f = |r: f64| (1.0 + r * r).powf(-0.8);
        let t = RadialTable::from_fn(f, 1e-2, 50.0, 2048, Parity::Even, 1.0, 1.6);
        for i in [0, 1, 100, 1024, 2047] {
            let r = t.node_radius(i);
            assert!((t.eval(r) - f(r)).abs() <= 1e-12 * f(r).abs());
        }
        for &r in &[0.013, 0.4, 1.7, 12.0, 49.0] {
            let rel = (t.eval(r) - f(r)).abs() / f(r);
            assert!(rel < 1e-8, "r={r} rel={rel}");
        }
    }

    #[test]
    fn parity_extensions() {
        let even = RadialTable::from_fn(|r| 2.0 - r * r, 1e-3, 1.0, 64, Parity::Even, 2.0, 1.0);
        assert_eq!(even.eval(0.0), 2.0);
        let v = even.eval(5e-4);
        assert!((v - (2.0 - 2.5e-7)).abs() < 1e-9);

        let odd = RadialTable::from_fn(|r| 3.0 * r, 1e-3, 1.0, 64, Parity::Odd, 0.0, 1.0);
        assert_eq!(odd.eval(0.0), 0.0);
        assert!((odd.eval(4e-4) - 1.2e-3).abs() < 1e-12);
    }

    #[test]
    fn tail_is_continuous_power_law() {
        let f = |r: f64| 0.7 * r.powf(-1.5);
        let t = RadialTable::from_fn(f, 0.1, 20.0, 512, Parity::Even, 0.0, 1.5);
        assert!((t.eval(20.0) - f(20.0)).abs() < 1e-14);
        assert!((t.eval(400.0) - f(400.0)).abs() < 1e-14);
    }

    #[test]
    fn rescaling_matches_function_rescaling() {
        let f = |r: f64| (-r * r).exp() + 0.1 / (1.0 + r);
        let t = RadialTable::from_fn(f, 1e-3, 10.0, 1024, Parity::Even, 1.1, 2.0);
        let s = t.rescaled(0.25, 3.0);
        for &r in &[3e-4, 0.01, 0.3, 2.0] {
            let want = 3.0 * t.eval(r / 0.25);
            assert!((s.eval(r) - want).abs() <= 1e-12 * want.abs().max(1e-300));
        }
    }
}
