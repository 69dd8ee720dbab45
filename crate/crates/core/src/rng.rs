// SPDX-License-Identifier: MIT OR Apache-2.0

//! Counter-based seed splitting.
//!
//! A root seed is expanded into a ChaCha key; every `(time, coordinate)`
//! draw gets its own ChaCha stream under that key, so a value depends only
//! on `(seed, t, m)` and never on evaluation order or thread count.
//! Replications obtain their own root seed through [`split_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of replication `index` from a root seed.
pub fn split_seed(root: u64, index: u64) -> u64 {
    mix64(mix64(root ^ GOLDEN).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Keyed family of independent streams addressed by `(t, m)`.
#[derive(Clone, Debug)]
pub struct StreamKey {
    key: [u8; 32],
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        Self { key }
    }

    /// Stream for 1-based time `t` and 0-based coordinate `m`.
    pub fn stream(&self, t: usize, m: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(((t as u64) << 32) | (m as u64 & 0xffff_ffff));
        rng
    }
}
