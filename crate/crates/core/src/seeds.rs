//! Seed derivation.
//!
//! Every random stream is a `ChaCha8Rng`. Derived seeds come from SplitMix64
//! finalization so that `(master, index)` pairs map to well-separated 64-bit
//! seeds:
//!
//! ```text
//! derive_seed(master, index) = mix(master ^ mix(index + 0x9E3779B97F4A7C15))
//! ```
//!
//! where `mix` is the SplitMix64 output function.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index.wrapping_add(GOLDEN)))
}

/// Seed for a node of a reset history: folds each chosen index into `master`.
pub fn path_seed(master: u64, path: &[usize]) -> u64 {
    // Depth is folded in first so that the root and a child never collide.
    let mut s = derive_seed(master, path.len() as u64);
    for &i in path {
        s = derive_seed(s, i as u64);
    }
    s
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
