//! Counter-based Gaussian streams.
//!
//! Every draw is addressed by `(seed, stream, block)`: the ChaCha keystream
//! for `(seed, stream)` is split into 128-bit blocks, and block `b` feeds one
//! Box-Muller transform producing a pair of independent standard normals.
//! Because the position is explicit, output never depends on the order in
//! which samples are generated or on how work is split across threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// 32-bit keystream words consumed per normal pair.
const WORDS_PER_BLOCK: u128 = 4;

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a purpose-specific seed so that different consumers of one master
/// seed (paths, residual noise, bootstrap, ...) never share a keystream.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

#[derive(Clone)]
pub struct CounterRng {
    inner: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Positions the generator at the start of `block`.
    pub fn seek(&mut self, block: u64) {
        self.inner.set_word_pos(block as u128 * WORDS_PER_BLOCK);
    }

    /// Draws the normal pair of the current block and advances by one block.
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let a = self.inner.next_u64();
        let b = self.inner.next_u64();
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// Normal pair at an explicit block, leaving the generator just after it.
    pub fn normal_pair_at(&mut self, block: u64) -> (f64, f64) {
        self.seek(block);
        self.normal_pair()
    }

    /// Uniform draw in `[0, 1)`; consumes half a block.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
