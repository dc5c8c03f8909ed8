//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream, index)`: the seed keys a
//! ChaCha8 generator, the stream id selects its 64-bit nonce and the index
//! jumps to a fixed block of the keystream. Draws for record `i` therefore do
//! not depend on how many other records were generated before it, or on which
//! worker generated them.

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};

/// Keystream words reserved per index.
const WORDS_PER_INDEX: u128 = 1 << 16;

pub const STREAM_COVARIATES: u64 = 0;
pub const STREAM_SURVIVAL: u64 = 1;
pub const STREAM_CENSORING: u64 = 2;
pub const STREAM_SPLIT: u64 = 3;
pub const STREAM_MONTE_CARLO: u64 = 4;

#[derive(Debug, Clone)]
pub struct CounterRng(ChaCha8Rng);

impl CounterRng {
    pub fn new(seed: u64, stream: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(index) * WORDS_PER_INDEX);
        Self(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..bound` (multiply-shift; bias below 2^-40 for
    /// the sizes used here).
    pub fn below(&mut self, bound: usize) -> usize {
        ((u128::from(self.next_u64()) * bound as u128) >> 64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Mixes a master seed with a replication number into an independent seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
