//! Smooth, rapidly decaying test functions with closed-form values and
//! gradients, plus their grid renderings.

use crate::fields::{Box3, GridField};

/// Test-function descriptors. All decay like Gaussians so that pairings on
/// the box agree with whole-space pairings far below solver accuracy.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `exp(-|x - c|² / (2 w²))`.
    Gaussian { center: [f64; 3], width: f64 },
    /// `(e · (x - c)) exp(-|x - c|² / (2 w²))` — a Gaussian-windowed
    /// linear function.
    WindowedLinear { direction: [f64; 3], center: [f64; 3], width: f64 },
    /// Constant value (diagnostics: fluctuations pair to zero with it).
    Constant { value: f64 },
}

impl TestFunction {
    /// The standard reproducible set used by the experiment drivers.
    pub fn standard_set() -> Vec<(&'static str, TestFunction)> {
        vec![
            ("g1", TestFunction::Gaussian { center: [0.0, 0.0, 0.0], width: 0.45 }),
            ("g2", TestFunction::Gaussian { center: [0.8, 0.5, -0.3], width: 0.42 }),
            ("g3", TestFunction::Gaussian { center: [0.0, 0.0, 0.0], width: 0.52 }),
            (
                "wl",
                TestFunction::WindowedLinear {
                    direction: [2.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0],
                    center: [0.0, 0.0, 0.0],
                    width: 0.5,
                },
            ),
        ]
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        match *self {
            TestFunction::Gaussian { center, width } => {
                let q = sq_dist(x, center);
                (-q / (2.0 * width * width)).exp()
            }
            TestFunction::WindowedLinear { direction, center, width } => {
                let q = sq_dist(x, center);
                let lin = direction[0] * (x[0] - center[0])
                    + direction[1] * (x[1] - center[1])
                    + direction[2] * (x[2] - center[2]);
                lin * (-q / (2.0 * width * width)).exp()
            }
            TestFunction::Constant { value } => value,
        }
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        match *self {
            TestFunction::Gaussian { center, width } => {
                let v = self.value(x);
                let w2 = width * width;
                [
                    -(x[0] - center[0]) / w2 * v,
                    -(x[1] - center[1]) / w2 * v,
                    -(x[2] - center[2]) / w2 * v,
                ]
            }
            TestFunction::WindowedLinear { direction, center, width } => {
                let q = sq_dist(x, center);
                let w2 = width * width;
                let g = (-q / (2.0 * w2)).exp();
                let lin = direction[0] * (x[0] - center[0])
                    + direction[1] * (x[1] - center[1])
                    + direction[2] * (x[2] - center[2]);
                [
                    (direction[0] - lin * (x[0] - center[0]) / w2) * g,
                    (direction[1] - lin * (x[1] - center[1]) / w2) * g,
                    (direction[2] - lin * (x[2] - center[2]) / w2) * g,
                ]
            }
            TestFunction::Constant { .. } => [0.0, 0.0, 0.0],
        }
    }

    /// Sample the closed form at every grid node.
    pub fn render(&self, grid: Box3) -> GridField {
        GridField::from_fn(grid, |p| self.value(p))
    }
}

#[inline]
fn sq_dist(x: [f64; 3], c: [f64; 3]) -> f64 {
    let d0 = x[0] - c[0];
    let d1 = x[1] - c[1];
    let d2 = x[2] - c[2];
    d0 * d0 + d1 * d1 + d2 * d2
}
