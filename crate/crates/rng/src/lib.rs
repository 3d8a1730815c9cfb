//! Deterministic random streams keyed by `(global_seed, frame_key, stage_tag)`.
//!
//! Every consumer of randomness in this workspace derives its own stream from
//! that triple, so any drawn value can be reproduced in isolation: there is no
//! global generator state, no draw-order coupling between pipeline stages, and
//! results are identical at any thread count. The stream itself is
//! counter-based: a 128-bit key hashed from the triple, mixed with the draw
//! index to produce each output block.

use sha2::{Digest, Sha256};

/// Separator byte inserted between key fields before hashing, so that
/// `("ab", "c")` and `("a", "bc")` derive different keys.
const FIELD_SEP: u8 = 0x1f;

/// Multiplier from the splitmix64 increment sequence.
const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// A seeded random stream addressed by `(global_seed, frame_key, stage_tag)`.
///
/// The key triple is hashed with SHA-256 and the first 16 bytes become the
/// stream key; output block `i` is a splitmix-style mix of the key and `i`.
/// Streams with distinct keys are independent, and a stream never depends on
/// how many values any other stream has drawn.
#[derive(Debug, Clone)]
pub struct SampleRng {
    k0: u64,
    k1: u64,
    counter: u64,
}

impl SampleRng {
    /// Derives the stream for `(global_seed, frame_key, stage_tag)`.
    pub fn new(global_seed: u64, frame_key: &str, stage_tag: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(global_seed.to_le_bytes());
        hasher.update([FIELD_SEP]);
        hasher.update(frame_key.as_bytes());
        hasher.update([FIELD_SEP]);
        hasher.update(stage_tag.as_bytes());
        let digest = hasher.finalize();
        Self {
            k0: u64::from_le_bytes(digest[0..8].try_into().unwrap()),
            k1: u64::from_le_bytes(digest[8..16].try_into().unwrap()),
            counter: 0,
        }
    }

    /// Returns output block `i` without touching the stream position.
    fn block(&self, i: u64) -> u64 {
        let mut z = i.wrapping_mul(GAMMA).wrapping_add(self.k0);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = z.wrapping_add(self.k1);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Next raw 64-bit value.
    pub fn next_u64(&mut self) -> u64 {
        let v = self.block(self.counter);
        self.counter += 1;
        v
    }

    /// Next value uniform in `[0, 1)`, with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Next value uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Next integer uniform in `[0, n)`. Panics if `n` is zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) has no valid output");
        // Modulo bias is below 2^-53 for the small ranges used here.
        self.next_u64() % n
    }

    /// Bernoulli draw: true with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Number of values drawn so far.
    pub fn draws(&self) -> u64 {
        self.counter
    }
}
