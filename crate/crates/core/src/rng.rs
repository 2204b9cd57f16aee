//! Seeded random streams.
//!
//! Every stochastic step draws from its own ChaCha stream keyed by
//! `(seed, tags...)`, so adding or skipping one consumer never perturbs the
//! draws of another. This is what makes e.g. a replay-free run reproduce the
//! naive parameter trajectory bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a 64-bit key from a base seed and a path of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tags))
}

/// Stream purposes; stable numeric values keep derived seeds stable.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const GENERATOR: u64 = 4;
    pub const BUFFER: u64 = 5;
    pub const FIDELITY: u64 = 6;
    pub const BALANCE: u64 = 7;
    pub const DATA: u64 = 8;
}
