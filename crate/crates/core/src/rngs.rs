//! Counter-based RNG stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a root
//! seed and a tuple of counters (block tag, sweep, index). Streams do not depend
//! on the order in which work is scheduled, so parallel and sequential runs are
//! bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a root seed with any number of counters into a single 64-bit key.
pub fn derive_seed(root: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(root), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Independent stream for the given counters.
pub fn substream(root: u64, counters: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(root, counters))
}
