//! Deterministic O(N^2) pair interactions.
//!
//! Particles are grouped into fixed chunks of 64; every unordered chunk
//! pair is an independent work item producing local accumulation buffers,
//! and the buffers are merged sequentially in chunk-pair order. The result
//! is bitwise independent of how many worker threads ran the items. Each
//! unordered particle pair is evaluated once and applied with opposite
//! signs (Newton's third law), so pair forces cancel in the drift sum.
//!
//! Displacements use the minimum-image convention of the periodic box, the
//! same geometry the spectral solver imposes on the mean-field densities.

use rayon::prelude::*;

use crate::fields::Box3;
use crate::kernels::PairTable;

const CHUNK: usize = 64;

#[inline]
fn min_image(mut d: f64, length: f64) -> f64 {
    // Both coordinates lie in [-L/2, L/2), so one fold suffices.
    if d >= 0.5 * length {
        d -= length;
    } else if d < -0.5 * length {
        d += length;
    }
    d
}

/// Minimum-image displacement `a - b` over the box.
#[inline]
pub fn displacement(a: [f64; 3], b: [f64; 3], grid: &Box3) -> [f64; 3] {
    let l = grid.length();
    [
        min_image(a[0] - b[0], l),
        min_image(a[1] - b[1], l),
        min_image(a[2] - b[2], l),
    ]
}

/// Minimum-image Euclidean distance.
#[inline]
pub fn distance(a: [f64; 3], b: [f64; 3], grid: &Box3) -> f64 {
    let d = displacement(a, b, grid);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

struct Block {
    a: usize,
    b: usize,
}

fn blocks(n: usize) -> Vec<Block> {
    let chunks = n.div_ceil(CHUNK);
    let mut out = Vec::with_capacity(chunks * (chunks + 1) / 2);
    for a in 0..chunks {
        for b in a..chunks {
            out.push(Block { a, b });
        }
    }
    out
}

#[inline]
fn chunk_range(c: usize, n: usize) -> std::ops::Range<usize> {
    let lo = c * CHUNK;
    lo..((lo + CHUNK).min(n))
}

struct DriftBuf {
    a: usize,
    b: usize,
    acc_a: [[f64; 3]; CHUNK],
    acc_b: [[f64; 3]; CHUNK],
}

/// Per-particle interaction gradient sums
///
/// `G_i = sum_{j != i} grad V(x_i - x_j)`
///
/// (minimum-image displacements), merged in a fixed order so the result is
/// independent of the rayon thread count.
pub fn grad_sums(positions: &[[f64; 3]], table: &PairTable, grid: &Box3) -> Vec<[f64; 3]> {
    let n = positions.len();
    let l = grid.length();
    let bufs: Vec<DriftBuf> = blocks(n)
        .par_iter()
        .map(|blk| {
            let mut buf = DriftBuf {
                a: blk.a,
                b: blk.b,
                acc_a: [[0.0; 3]; CHUNK],
                acc_b: [[0.0; 3]; CHUNK],
            };
            let ra = chunk_range(blk.a, n);
            let rb = chunk_range(blk.b, n);
            if blk.a == blk.b {
                for i in ra.clone() {
                    let xi = positions[i];
                    for j in (i + 1)..ra.end {
                        let xj = positions[j];
                        let dx = min_image(xi[0] - xj[0], l);
                        let dy = min_image(xi[1] - xj[1], l);
                        let dz = min_image(xi[2] - xj[2], l);
                        let (g, _, _) = table.eval(dx * dx + dy * dy + dz * dz);
                        let f = [g * dx, g * dy, g * dz];
                        let ia = i - ra.start;
                        let ja = j - ra.start;
                        for c in 0..3 {
                            buf.acc_a[ia][c] += f[c];
                            buf.acc_a[ja][c] -= f[c];
                        }
                    }
                }
            } else {
                for i in ra.clone() {
                    let xi = positions[i];
                    let ia = i - ra.start;
                    for j in rb.clone() {
                        let xj = positions[j];
                        let dx = min_image(xi[0] - xj[0], l);
                        let dy = min_image(xi[1] - xj[1], l);
                        let dz = min_image(xi[2] - xj[2], l);
                        let (g, _, _) = table.eval(dx * dx + dy * dy + dz * dz);
                        let f = [g * dx, g * dy, g * dz];
                        let jb = j - rb.start;
                        for c in 0..3 {
                            buf.acc_a[ia][c] += f[c];
                            buf.acc_b[jb][c] -= f[c];
                        }
                    }
                }
            }
            buf
        })
        .collect();

    let mut out = vec![[0.0f64; 3]; n];
    for buf in &bufs {
        let ra = chunk_range(buf.a, n);
        for (local, i) in ra.clone().enumerate() {
            for c in 0..3 {
                out[i][c] += buf.acc_a[local][c];
            }
        }
        if buf.a != buf.b {
            let rb = chunk_range(buf.b, n);
            for (local, j) in rb.enumerate() {
                for c in 0..3 {
                    out[j][c] += buf.acc_b[local][c];
                }
            }
        }
    }
    out
}

/// Per-particle and total pair-kernel sums used by the error functionals
/// and the law-of-large-numbers statistics:
///
/// * `grad[i] = sum_{j != i} grad V(x_i - x_j)`
/// * `v_row[i] = sum_{j != i} V(x_i - x_j)` (diagonal `V(0)` excluded)
/// * `lap_total = sum_{i != j} Delta V(x_i - x_j)`
pub struct PairSums {
    pub grad: Vec<[f64; 3]>,
    pub v_row: Vec<f64>,
    pub lap_total: f64,
}

struct StatBuf {
    a: usize,
    b: usize,
    acc_a: [[f64; 4]; CHUNK],
    acc_b: [[f64; 4]; CHUNK],
    lap: f64,
}

pub fn pair_sums(positions: &[[f64; 3]], table: &PairTable, grid: &Box3) -> PairSums {
    let n = positions.len();
    let l = grid.length();
    let bufs: Vec<StatBuf> = blocks(n)
        .par_iter()
        .map(|blk| {
            let mut buf = StatBuf {
                a: blk.a,
                b: blk.b,
                acc_a: [[0.0; 4]; CHUNK],
                acc_b: [[0.0; 4]; CHUNK],
                lap: 0.0,
            };
            let ra = chunk_range(blk.a, n);
            let rb = chunk_range(blk.b, n);
            let mut handle = |i: usize, j: usize, same: bool| {
                let xi = positions[i];
                let xj = positions[j];
                let dx = min_image(xi[0] - xj[0], l);
                let dy = min_image(xi[1] - xj[1], l);
                let dz = min_image(xi[2] - xj[2], l);
                let (g, v, lap) = table.eval(dx * dx + dy * dy + dz * dz);
                let ia = i - ra.start;
                let jx = if same { j - ra.start } else { j - rb.start };
                let f = [g * dx, g * dy, g * dz];
                let (first, second) = if same {
                    let (lo, hi) = buf.acc_a.split_at_mut(jx);
                    (&mut lo[ia], &mut hi[0])
                } else {
                    (&mut buf.acc_a[ia], &mut buf.acc_b[jx])
                };
                for c in 0..3 {
                    first[c] += f[c];
                    second[c] -= f[c];
                }
                first[3] += v;
                second[3] += v;
                buf.lap += 2.0 * lap;
            };
            if blk.a == blk.b {
                for i in ra.clone() {
                    for j in (i + 1)..ra.end {
                        handle(i, j, true);
                    }
                }
            } else {
                for i in ra.clone() {
                    for j in rb.clone() {
                        handle(i, j, false);
                    }
                }
            }
            buf
        })
        .collect();

    let mut grad = vec![[0.0f64; 3]; n];
    let mut v_row = vec![0.0f64; n];
    let mut lap_total = 0.0f64;
    for buf in &bufs {
        let ra = chunk_range(buf.a, n);
        for (local, i) in ra.clone().enumerate() {
            for c in 0..3 {
                grad[i][c] += buf.acc_a[local][c];
            }
            v_row[i] += buf.acc_a[local][3];
        }
        if buf.a != buf.b {
            let rb = chunk_range(buf.b, n);
            for (local, j) in rb.enumerate() {
                for c in 0..3 {
                    grad[j][c] += buf.acc_b[local][c];
                }
                v_row[j] += buf.acc_b[local][3];
            }
        }
        lap_total += buf.lap;
    }
    PairSums { grad, v_row, lap_total }
}
