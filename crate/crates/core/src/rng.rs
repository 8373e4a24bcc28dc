//! Seeded random streams.
//!
//! Every stochastic decision draws from a stream keyed by the run seed plus a
//! stable path of indices (generation, purpose, entity). Streams never depend
//! on scheduling, so parallel evaluation reproduces sequential runs exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, path: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Purpose tags used as the second path element.
pub mod purpose {
    pub const MASK: u64 = 1;
    pub const INIT: u64 = 2;
    pub const PAIRING: u64 = 3;
    pub const MUTATE: u64 = 4;
    pub const FRESH: u64 = 5;
    pub const ROULETTE: u64 = 6;
    pub const STITCH: u64 = 7;
}
