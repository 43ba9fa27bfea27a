//! Deterministic RNG plumbing.
//!
//! Every stochastic component draws from a `ChaCha8Rng` whose seed is derived
//! from a parent seed and a stream index. Keying streams by index (rather
//! than pulling from one shared generator) keeps results independent of
//! execution order, which is what lets the parallel and sequential code paths
//! produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Create a deterministic generator from a seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent child seed from a parent seed and a stream index.
pub fn child_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream.wrapping_add(0xA076_1D64_78BD_642F)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
