//! Seeded randomness.
//!
//! All stochastic code paths draw from [`SeededRng`], a xoshiro256++ generator
//! whose 256-bit state is expanded from a single `u64` seed with splitmix64.
//! Independent streams (one per synthetic word, say) are derived with
//! [`derive_seed`], which folds extra coordinates into the seed through the
//! splitmix64 finalizer.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// splitmix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`, one splitmix64 round per coordinate.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
