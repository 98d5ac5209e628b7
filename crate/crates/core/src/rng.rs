//! Seed derivation. Every random draw in the crate comes from a `ChaCha8Rng`
//! built here, so a run is reproducible from its integer seeds alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named streams carved out of a trial seed. Consumers of one stream never
/// perturb the draws of another.
pub mod streams {
    pub const TASKS: u64 = 1;
    pub const INITIAL_STATE: u64 = 2;
    pub const PREPARATION: u64 = 3;
    pub const SOLVER: u64 = 4;
    pub const TRAINING: u64 = 5;
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer over `a` combined with `b`.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
