//! Named, reproducible random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from one
//! root seed and a stream name, so adding draws to one stream never shifts
//! another. Common random numbers across agents fall out of this directly:
//! two agents that ask for the same named stream see the same sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub const STATES: &str = "states";
pub const AGENT_TARGETS: &str = "agent-targets";
pub const AGENT_NOISE: &str = "agent-noise";
pub const AGENT_SKILL: &str = "agent-skill";
pub const FILTER_INIT: &str = "filter-init";
pub const FILTER_RESAMPLE: &str = "filter-resample";
pub const FILTER_PERTURB: &str = "filter-perturb";
pub const METRICS: &str = "metrics";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, name: &str) -> Stream {
        Stream::seed_from_u64(splitmix(self.seed ^ fnv1a(name.as_bytes())))
    }

    pub fn indexed(&self, name: &str, index: u64) -> Stream {
        let key = splitmix(self.seed ^ fnv1a(name.as_bytes())) ^ splitmix(index.wrapping_add(0x9e37));
        Stream::seed_from_u64(splitmix(key))
    }

    /// A child root seed, for nesting whole experiments under one seed.
    pub fn child(&self, name: &str, index: u64) -> SeedStreams {
        SeedStreams::new(splitmix(
            splitmix(self.seed ^ fnv1a(name.as_bytes())).wrapping_add(index),
        ))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
