//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha stream whose seed is derived from
//! the run seed plus a tuple of context words (round, client, purpose). Streams
//! are therefore independent of evaluation order, which is what lets client
//! work run in parallel without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags, so that two draws with the same (round, client) never share a
/// stream.
pub mod stream {
    pub const PROJECTION: u64 = 0x01;
    pub const PARTITION: u64 = 0x02;
    pub const CLIENT_SAMPLING: u64 = 0x03;
    pub const LOCAL_ORDER: u64 = 0x04;
    pub const CHANNEL: u64 = 0x05;
    pub const SUBSAMPLE: u64 = 0x06;
    pub const SYNTH_MEANS: u64 = 0x07;
    pub const SYNTH_SAMPLES: u64 = 0x08;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with context words into a new 64-bit seed.
pub fn derive_seed(seed: u64, context: &[u64]) -> u64 {
    context
        .iter()
        .fold(splitmix64(seed), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn rng_from(seed: u64, context: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, context))
}
