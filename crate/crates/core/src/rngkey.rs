//! Deterministic, order-independent random streams.
//!
//! Every stochastic stage derives its generator from the master seed and a
//! set of stable identifiers (fold, window, ego, agent, stage label) instead
//! of consuming a shared sequence. Work scheduled across any number of
//! threads therefore draws exactly the same values, which is what makes the
//! pipeline byte-reproducible at any parallelism level.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Accumulates identifiers into a 64-bit stream key.
///
/// Mixing is splitmix64 over each absorbed word, so the key is stable across
/// platforms and releases (unlike `DefaultHasher`).
#[derive(Debug, Clone, Copy)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(master_seed: u64, stage: &str) -> Self {
        let mut key = StreamKey(master_seed ^ 0x9e37_79b9_7f4a_7c15);
        key = key.with_bytes(stage.as_bytes());
        key
    }

    pub fn with(self, value: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ value))
    }

    pub fn with_i64(self, value: i64) -> Self {
        self.with(value as u64)
    }

    pub fn with_bytes(self, bytes: &[u8]) -> Self {
        let mut key = self.with(bytes.len() as u64);
        for chunk in bytes.chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            key = key.with(u64::from_le_bytes(word));
        }
        key
    }

    /// Finalize into a seeded generator for this stream.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix64(self.0))
    }

    pub fn value(self) -> u64 {
        splitmix64(self.0)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
