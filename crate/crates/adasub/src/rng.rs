//! Seeded RNG streams.
//!
//! One root seed reproduces a whole experiment: every consumer derives its
//! own independent stream via a labeled split, so adding or reordering
//! consumers never perturbs the draws seen by the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The PRNG used throughout the crate.
pub type Stream = ChaCha8Rng;

/// SplitMix64 finalizer; diffuses the bits of a combined seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a, stable across platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// The mixed 64-bit seed behind `stream(root, label, index)`; for handing a
/// derived seed to an API that takes one.
pub fn subseed(root: u64, label: &str, index: u64) -> u64 {
    mix(root ^ mix(label_hash(label)) ^ mix(index))
}

/// Derive the stream `(root, label, index)`.
pub fn stream(root: u64, label: &str, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(subseed(root, label, index))
}
