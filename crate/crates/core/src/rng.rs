//! Counter-keyed random streams.
//!
//! Every random draw in the crate comes from a generator seeded by a hash of
//! `(seed, replicate, stream, index)`, so results never depend on the order in
//! which workers touch cells or samples.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

/// Identifies one replication of a random experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedKey {
    pub seed: u64,
    pub replicate: u64,
}

impl SeedKey {
    pub fn new(seed: u64, replicate: u64) -> Self {
        SeedKey { seed, replicate }
    }

    /// Generator for item `index` of the named `stream`.
    pub fn rng(&self, stream: u64, index: u64) -> Xoshiro256PlusPlus {
        let mut h = mix(self.seed ^ 0x5851_f42d_4c95_7f2d);
        h = mix(h ^ self.replicate);
        h = mix(h ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        h = mix(h ^ index);
        Xoshiro256PlusPlus::seed_from_u64(h)
    }
}

/// Streams used by the crate; distinct values keep draws independent.
pub mod stream {
    pub const NOISE: u64 = 1;
    pub const CHAOS: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
