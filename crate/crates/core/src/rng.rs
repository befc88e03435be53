//! Keyed random streams.
//!
//! Every stochastic step in the crate draws from a generator derived from a
//! user seed plus a key describing *what* is being drawn (agent, day, window,
//! run...). Results therefore do not depend on evaluation order or thread
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a over raw bytes. Stable across platforms and releases.
#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Folds a seed and a key path into a single 64-bit stream id.
pub fn stream_id(seed: u64, key: &[u64]) -> u64 {
    let mut h = mix64(seed);
    for &k in key {
        h = mix64(h ^ k.wrapping_mul(GOLDEN));
    }
    h
}

pub fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_id(seed, key))
}

/// Key component for a string label (agent id, event id).
pub fn label_key(label: &str) -> u64 {
    fnv1a64(label.as_bytes())
}
