//! Seeded random number generation.
//!
//! Every stochastic operation in the crate draws from ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`. ChaCha output is specified bit-for-bit, so a
//! fixed seed reproduces the same subsample, corruption, or fixture on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k` distinct indices from `[0, n)`, uniformly without replacement, sorted.
pub fn sample_indices(rng: &mut Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}
