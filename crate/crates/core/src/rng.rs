//! Seed-stream contract shared by every Monte Carlo routine.
//!
//! Replicate `r` of a run with base seed `s` draws from a ChaCha8 generator
//! seeded with `s + r` (wrapping). The generator's stream id is set to the
//! sample size `n`, so rungs of an `n` ladder never share random numbers
//! while changing the replicate count leaves earlier replicates untouched.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed for replicate `index` under `base_seed`.
pub fn replicate_seed(base_seed: u64, index: u64) -> u64 {
    base_seed.wrapping_add(index)
}

/// Generator for a single draw of size `n` under `seed`.
pub fn rng_for(seed: u64, n: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    rng
}
