//! Counter-based random substreams.
//!
//! Every random quantity in the crate is drawn from a stream addressed by
//! `(root seed, domain, index...)`. Streams are ChaCha8 keyed by a mix of the
//! root seed and domain, with the remaining indices packed into the 64-bit
//! ChaCha stream id, so a stream can be constructed on any worker without
//! touching any other stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream families. Keeping them disjoint means a trial generator and an
/// imputation run sharing a root seed never reuse each other's draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Trial = 1,
    Imputation = 2,
    Experiment = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and an index.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Stream for `(seed, domain, major, minor)`; `major` and `minor` are packed
/// into the ChaCha stream id, so each must fit in 32 bits.
pub fn stream(seed: u64, domain: Domain, major: u32, minor: u32) -> ChaCha8Rng {
    let key = child_seed(seed, domain as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(((major as u64) << 32) | minor as u64);
    rng
}
