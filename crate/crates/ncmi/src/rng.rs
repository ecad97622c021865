//! Seed derivation for reproducible, splittable randomness.
//!
//! Every random decision in the crate flows from a `ChaCha8Rng` derived from
//! a master seed and a tag path, so distinct runs (Monte Carlo iterations,
//! schemes, interfaces) get independent streams while the whole experiment
//! stays reproducible regardless of execution order or parallelism.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a tag path into a single derived seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix(master);
    for &t in tags {
        s = splitmix(s ^ splitmix(t));
    }
    s
}

/// A deterministic RNG for the stream identified by `(master, tags)`.
pub fn derive_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
