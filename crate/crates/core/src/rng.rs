//! Seed derivation. Every random stream in a run is a pure function of the
//! run seed and a stream label, so sync-mode runs replay bitwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index into an independent seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream.rotate_left(17)) ^ index.rotate_left(41))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream tags.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const AGENT: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const LINKS: u64 = 4;
    pub const TOPOLOGY: u64 = 5;
    pub const TASKS: u64 = 6;
    pub const CENTRAL: u64 = 7;
}
