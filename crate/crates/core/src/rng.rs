//! Seed derivation. Every sample draws from its own ChaCha stream keyed by
//! `(seed, index)`, so generated data does not depend on how work is split
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable that overrides the default seed of the CLI.
pub const SEED_ENV: &str = "WMMSE_LEARN_SEED";

pub const DEFAULT_SEED: u64 = 7;

pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a purpose tag into a seed so that independent consumers of one user
/// seed (e.g. the random baseline and the training shuffle) never share a stream.
pub fn derive(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
