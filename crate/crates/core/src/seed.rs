//! Seed derivation and the crate-wide RNG.
//!
//! Every randomized routine takes an explicit `u64` seed. Child streams are
//! derived with [`derive_seed`] from a parent seed, a stream tag and an index,
//! so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Stream tags keep sibling derivations apart.
pub mod stream {
    pub const GRAPH: u64 = 0x01;
    pub const GRAPH_RETRY: u64 = 0x02;
    pub const START: u64 = 0x03;
    pub const RECORD: u64 = 0x04;
    pub const RECORD_OPT: u64 = 0x05;
    pub const WEIGHT_INIT: u64 = 0x06;
    pub const TRAIN: u64 = 0x07;
    pub const SAMPLE_CHAIN: u64 = 0x08;
    pub const EVAL_INSTANCE: u64 = 0x09;
    pub const EVAL_DDPM: u64 = 0x0a;
    pub const EVAL_RANDOM: u64 = 0x0b;
    pub const EVAL_LARGE: u64 = 0x0c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `(parent, tag, index)`.
pub fn derive_seed(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(parent) ^ tag.rotate_left(32)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
