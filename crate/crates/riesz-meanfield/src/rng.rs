//! Counter-based noise: every Gaussian increment is a pure function of
//! (seed, realization, particle, step), so trajectories are bit-reproducible
//! regardless of thread count, chunking or replay order.
//!
//! Layout: a ChaCha12 key is derived from (seed, realization) by a splitmix64
//! chain; the particle index selects the ChaCha stream and the step index the
//! block position inside the stream. Each (particle, step) cell owns one
//! 16-word block and consumes a fixed number of words, so distinct cells never
//! share keystream.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

const WORDS_PER_BLOCK: u128 = 16;
/// Block index reserved for initial-condition draws; dynamics use block = step.
const INIT_BLOCK: u128 = 1 << 62;

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// splitmix64 finalizer step; advances `state` and returns a mixed word.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Map a u64 to a uniform in [0, 1) with 53-bit resolution.
pub fn uniform01(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Map a u64 to a uniform in (0, 1]; safe as a log argument.
fn uniform01_open_left(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// Two standard normals from two words (Box-Muller).
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let u1 = uniform01_open_left(a);
    let u2 = uniform01(b);
    let r = (-2.0 * u1.ln()).sqrt();
    let th = TWO_PI * u2;
    (r * th.cos(), r * th.sin())
}

/// Noise source for one realization of one experiment.
#[derive(Clone)]
pub struct NoiseKey {
    base: ChaCha12Rng,
    pub seed: u64,
    pub realization: u64,
}

impl NoiseKey {
    pub fn new(seed: u64, realization: u64) -> Self {
        let mut s = seed;
        let mut key = [0u8; 32];
        let k0 = splitmix64(&mut s);
        let k1 = splitmix64(&mut s);
        s ^= realization.wrapping_mul(0xd1342543de82ef95);
        let k2 = splitmix64(&mut s);
        let k3 = splitmix64(&mut s);
        key[0..8].copy_from_slice(&k0.to_le_bytes());
        key[8..16].copy_from_slice(&k1.to_le_bytes());
        key[16..24].copy_from_slice(&k2.to_le_bytes());
        key[24..32].copy_from_slice(&k3.to_le_bytes());
        NoiseKey {
            base: ChaCha12Rng::from_seed(key),
            seed,
            realization,
        }
    }

    fn cell(&self, particle: u64, block: u128) -> ChaCha12Rng {
        let mut rng = self.base.clone();
        rng.set_stream(particle);
        rng.set_word_pos(block * WORDS_PER_BLOCK);
        rng
    }

    /// The three Gaussian increments G_{i,n} for particle `i` at step `n`.
    /// Consumes four u64 (8 words) of the 16-word (i, n) block.
    pub fn normals_step(&self, particle: u64, step: u64) -> [f64; 3] {
        let mut rng = self.cell(particle, step as u128);
        let (a, b) = (rng.next_u64(), rng.next_u64());
        let (c, d) = (rng.next_u64(), rng.next_u64());
        let (z0, z1) = box_muller(a, b);
        let (z2, _) = box_muller(c, d);
        [z0, z1, z2]
    }

    /// Draws for the initial condition of particle `i`: one uniform (mixture
    /// component selection) and three standard normals. Fixed consumption of
    /// five u64 inside the reserved init block.
    pub fn init_draws(&self, particle: u64) -> (f64, [f64; 3]) {
        let mut rng = self.cell(particle, INIT_BLOCK);
        let u = uniform01(rng.next_u64());
        let (a, b) = (rng.next_u64(), rng.next_u64());
        let (c, d) = (rng.next_u64(), rng.next_u64());
        let (z0, z1) = box_muller(a, b);
        let (z2, _) = box_muller(c, d);
        (u, [z0, z1, z2])
    }
}
