//! Seed derivation helpers.
//!
//! Every stochastic stage of the pipeline consumes a `ChaCha8Rng` seeded
//! through [`derive_seed`], a splittable counter scheme: sample `i` of a
//! batch is reproducible in isolation from `(master_seed, i)` without
//! generating its predecessors.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function. Statistically independent outputs for
/// sequential (or otherwise distinct) inputs.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent child seed from a master seed and a stream index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_mul(0xa076_1d64_78bd_642f)))
}

/// RNG for a derived stream. `ChaCha8` keeps draws reproducible across
/// platforms and thread schedules.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}
