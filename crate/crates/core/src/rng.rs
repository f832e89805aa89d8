//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from a base
//! seed and a key path such as `(trial, episode, step, worker)`, so the order in
//! which independent work items run never changes what any of them draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and a key path.
pub fn stream(seed: u64, key: &[u64]) -> RngStream {
    let mut h = splitmix64(seed ^ 0x6A09_E667_F3BC_C908);
    for (i, k) in key.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(i as u64).wrapping_mul(0xA24B_AED4_963E_E407)));
    }
    let mut bytes = [0u8; 32];
    for (i, chunk) in bytes.chunks_exact_mut(8).enumerate() {
        h = splitmix64(h.wrapping_add(i as u64));
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Labels for the random stream of one planning call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub trial: u64,
    pub episode: u64,
    pub step: u64,
    pub worker: u64,
}

impl StreamKey {
    pub fn rng(&self, seed: u64) -> RngStream {
        stream(seed, &[self.trial, self.episode, self.step, self.worker])
    }
}
