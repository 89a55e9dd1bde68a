//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] derived from a
//! base seed plus a small tuple of stream coordinates (for example
//! `(step, device)` during search), so results do not depend on evaluation
//! order.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and the given coordinates.
pub fn substream(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    let mut h = mix64(seed);
    for &c in coords {
        h = mix64(h ^ mix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Plain seeded stream.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used to keep unrelated consumers of one seed apart.
pub mod tags {
    pub const BENCHMARK: u64 = 1;
    pub const REFERENCE_CONFIGS: u64 = 2;
    pub const HYPERNET_INIT: u64 = 3;
    pub const PRETRAIN: u64 = 4;
    pub const PREDICTOR: u64 = 5;
    pub const SEARCH_UPPER: u64 = 6;
    pub const SEARCH_LOWER: u64 = 7;
    pub const BASELINE: u64 = 8;
    pub const NORM_STATS: u64 = 9;
    pub const SURROGATE_INIT: u64 = 10;
    pub const SCHEDULE: u64 = 11;
}
