//! Keyed pseudorandom streams.
//!
//! Every random choice in the simulator is derived from a 64-bit key built
//! by folding its context (seed, cache, file, slot, ...) through the
//! SplitMix64 finalizer. The key seeds a ChaCha8 stream, and bounded draws
//! use rejection sampling on raw `u64` outputs, so a given key yields the
//! same selection on every platform and in every implementation that
//! follows these three steps.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub const DOMAIN_PLACEMENT: u64 = 0x706c_6163_656d_656e;
pub const DOMAIN_LIBRARY: u64 = 0x6c69_6272_6172_7921;
pub const DOMAIN_POPULAR: u64 = 0x706f_7075_6c61_7221;
pub const DOMAIN_ORDER: u64 = 0x6f72_6465_7269_6e67;

/// SplitMix64 finalizer.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds the parts left to right: `h = mix64(h ^ part)`, starting from 0.
pub fn derive_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0u64, |h, &p| mix64(h ^ p))
}

pub struct KeyedStream {
    inner: ChaCha8Rng,
}

impl KeyedStream {
    pub fn new(key: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        // Largest multiple of `bound` that fits; draws at or above it are redrawn.
        let zone = u64::MAX - (u64::MAX % bound + 1) % bound;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % bound;
            }
        }
    }
}

/// Chooses `quota` distinct indices from `0..total` with a partial
/// Fisher-Yates shuffle driven by `key`. The result is in selection order.
pub fn select_indices(key: u64, total: usize, quota: usize) -> Vec<u32> {
    assert!(quota <= total);
    let mut stream = KeyedStream::new(key);
    let mut idx: Vec<u32> = (0..total as u32).collect();
    for i in 0..quota {
        let j = i + stream.below((total - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(quota);
    idx
}
