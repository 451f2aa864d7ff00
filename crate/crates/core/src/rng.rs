//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`GkRng`], a xoshiro256++
//! generator whose 256-bit state is expanded from a 64-bit seed with
//! SplitMix64 (the `seed_from_u64` rule of `rand_xoshiro`). Independent
//! streams (replicates, LD blocks) get their own seed through
//! [`derive_seed`], so results never depend on scheduling order.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type GkRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> GkRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `master`:
/// `splitmix64(master ^ splitmix64(stream))`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}
