//! Deterministic seed derivation.
//!
//! Every random draw in an experiment comes from its own stream, keyed by the
//! master seed, a stream tag and up to two indices. Seeds are derived with the
//! SplitMix64 finaliser so neighbouring indices give unrelated streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stream {
    Signatures,
    Placement,
    Noise,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Signatures => 0x5349_474e,
            Stream::Placement => 0x504c_4143,
            Stream::Noise => 0x4e4f_4953,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream` at (`outer`, `inner`). Trial streams use `inner` for the
/// trial index and `outer` for the sweep point (0 when shared across points).
pub fn derive_seed(master: u64, stream: Stream, outer: u64, inner: u64) -> u64 {
    let mut h = splitmix64(master ^ stream.tag().rotate_left(32));
    h = splitmix64(h ^ outer);
    splitmix64(h ^ inner.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
