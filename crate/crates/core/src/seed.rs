//! Seed derivation.
//!
//! Every random draw in the pipeline comes from a [`ChaCha8Rng`] whose seed
//! is derived from an explicit base seed, an index and a purpose tag through
//! the SplitMix64 finalizer. Results therefore never depend on the order in
//! which samples are processed or on how many workers process them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep seed streams for different uses apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Sample = 0x5341_4d50,
    McDropout = 0x4d43_4450,
    Noise = 0x4e4f_4953,
    MaskFill = 0x4d41_534b,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer (Steele, Lea & Flood 2014).
pub const fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `(base, index, purpose)`.
pub fn derive(base: u64, index: u64, purpose: Purpose) -> u64 {
    let mut h = splitmix64(base.wrapping_add(GOLDEN_GAMMA));
    h = splitmix64(h ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    splitmix64(h ^ (purpose as u64))
}

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    s.bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
