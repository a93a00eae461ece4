//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a parent seed plus a short path of
//! integers (cell coordinates, member index, layer index, ...). Derived seeds depend only
//! on that key, never on the order in which streams are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `parent` and a key path.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    let mut state = mix64(parent.wrapping_add(GOLDEN));
    for (i, &k) in path.iter().enumerate() {
        state = mix64(state ^ mix64(k.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 2))));
    }
    state
}

/// Hash a string label into a stream tag.
pub fn tag(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
