//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`], a counter-based
//! stream cipher generator whose output is fixed by its 64-bit seed on every
//! platform. Seeds for independent stages of a pipeline are derived from one
//! root seed with [`derive_seed`], so a run is fully determined by that root.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Generator for `seed`. Bit-identical streams across platforms and runs.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named stage: `mix64(root ^ fnv1a(stage))`.
pub fn derive_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(root ^ h)
}

/// Seed for the `index`-th member of a family of independent draws.
pub fn derive_indexed(root: u64, stage: &str, index: u64) -> u64 {
    mix64(derive_seed(root, stage).wrapping_add(mix64(index)))
}
