//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream whose seed is a
//! pure function of the caller's master seed and a path of integer tags
//! (tree index, node path, feature index, ...). Streams therefore never
//! depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Distinct tags keep sibling streams apart.
pub(crate) mod tag {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const TREE: u64 = 0x5452_4545;
    pub const NODE: u64 = 0x4e4f_4445;
    pub const PERMUTE: u64 = 0x5045_524d;
    pub const SHADOW: u64 = 0x5348_4144;
    pub const BORUTA_ITER: u64 = 0x4249_5452;
    pub const BORUTA_FOREST: u64 = 0x4246_5253;
    pub const BORUTA_IMPORTANCE: u64 = 0x4249_4d50;
    pub const BAG: u64 = 0x4241_4753;
    pub const BAG_BORUTA: u64 = 0x4242_5254;
    pub const REPETITION: u64 = 0x5245_5045;
    pub const RANKING: u64 = 0x5241_4e4b;
    pub const MODEL: u64 = 0x4d4f_444c;
    pub const SELECTION: u64 = 0x5345_4c45;
    pub const SYNTH: u64 = 0x5359_4e54;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of tags.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(seed), |h, &w| mix64(h ^ mix64(w.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub(crate) fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stable 64-bit hash of a string, used to key per-method streams by label.
pub(crate) fn label_key(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}
