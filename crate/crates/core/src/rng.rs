//! Seed derivation for reproducible, order-independent randomness.
//!
//! Every random draw is keyed by a path of indices from a master seed
//! (trial, then stream, then player), so results do not depend on the order or
//! thread in which trials and players are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for the `index`-th child stream of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(parent ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// A sequential stream for `seed`.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A fair bit addressed by `(key, counter)`, independent of evaluation order.
pub fn keyed_bit(key: u64, counter: u64) -> u8 {
    (derive_seed(key, counter) >> 63) as u8
}
