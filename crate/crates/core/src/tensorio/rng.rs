use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Shape, VideoTensor};
use crate::error::Result;

/// Counter-based random stream.
///
/// Slot `k` of the stream owns the ChaCha8 block words `4k..4k+4` (two
/// `u64`s) of the generator keyed by `seed`. Every draw consumes exactly one
/// slot, so the value of draw `k` depends only on `(seed, k)`: splitting a
/// batch of draws into several calls yields the same sequence.
///
/// Normals use the cosine branch of Box–Muller on the slot's two uniforms.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    position: u64,
    gen: ChaCha8Rng,
}

const WORDS_PER_SLOT: u128 = 4;

impl PartialEq for RngState {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.position == other.position
    }
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::at(seed, 0)
    }

    pub fn at(seed: u64, position: u64) -> Self {
        let mut gen = ChaCha8Rng::seed_from_u64(seed);
        gen.set_word_pos(u128::from(position) * WORDS_PER_SLOT);
        RngState {
            seed,
            position,
            gen,
        }
    }

    /// Independent stream for a named stage, e.g. `"eps"` or `"eta:2"`.
    pub fn substream(root: u64, name: &str) -> Self {
        Self::new(derive_seed(root, name))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    fn slot(&mut self) -> (u64, u64) {
        let a = self.gen.next_u64();
        let b = self.gen.next_u64();
        self.position += 1;
        (a, b)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        let (a, _) = self.slot();
        unit_open_right(a)
    }

    /// Uniform integer in `0..n` (`n >= 1`).
    pub fn next_below(&mut self, n: usize) -> usize {
        ((self.next_uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn next_normal(&mut self) -> f64 {
        let (a, b) = self.slot();
        box_muller(a, b)
    }

    pub fn fill_normal(&mut self, out: &mut [f32]) {
        for v in out {
            *v = self.next_normal() as f32;
        }
    }

    /// Fisher–Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}

fn unit_open_right(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> f64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = unit_open_right(b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Stable seed derivation: FNV-1a of the name folded into the root seed,
/// then one SplitMix64 finalization round.
pub fn derive_seed(root: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// I.i.d. standard-normal tensor drawn from `rng`.
pub fn gaussian_tensor(shape: Shape, rng: &mut RngState) -> Result<VideoTensor> {
    shape.validate()?;
    let mut data = vec![0.0f32; shape.numel()];
    rng.fill_normal(&mut data);
    VideoTensor::new(shape, data)
}
