//! Deterministic seed derivation.
//!
//! Every random draw in the pipeline comes from a `ChaCha8Rng` seeded from a
//! 64-bit value derived from the master seed and a tuple of counters, so that
//! tasks can run in any order (or in parallel) and still reproduce bit-exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an ordered list of counters.
pub fn derive(master: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(mix(master), |acc, &c| mix(acc ^ mix(c.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, counters: &[u64]) -> SimRng {
    rng(derive(master, counters))
}
