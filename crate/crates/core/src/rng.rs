//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, key, index)`, so results do not
//! depend on evaluation order or thread count. The mixer is the SplitMix64
//! finalizer applied once per key word.
//!
//! Gaussian draws use the cosine branch of Box-Muller on two uniforms taken
//! from lanes 0 and 1 of the same counter:
//!
//! ```text
//! u1 = ((h0 >> 11) + 1) * 2^-53        in (0, 1]
//! u2 = (h1 >> 11) * 2^-53              in [0, 1)
//! z  = sqrt(-2 ln u1) * cos(2 pi u2)
//! ```

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const KEY_MULT: u64 = 0xd1b5_4a32_d192_ed03;
const INDEX_MULT: u64 = 0xa24b_aed4_963e_e407;
const TWO_POW_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Raw 64-bit output for `(seed, key, index, lane)`.
#[inline]
pub fn hash(seed: u64, key: u64, index: u64, lane: u64) -> u64 {
    let mut h = mix64(seed);
    h = mix64(h ^ key.wrapping_mul(KEY_MULT));
    h = mix64(h ^ index.wrapping_mul(INDEX_MULT));
    mix64(h ^ lane)
}

/// Uniform in `[0, 1)`.
#[inline]
pub fn uniform(seed: u64, key: u64, index: u64) -> f64 {
    (hash(seed, key, index, 0) >> 11) as f64 * TWO_POW_NEG_53
}

/// Standard normal.
#[inline]
pub fn gaussian(seed: u64, key: u64, index: u64) -> f64 {
    let u1 = ((hash(seed, key, index, 0) >> 11) + 1) as f64 * TWO_POW_NEG_53;
    let u2 = (hash(seed, key, index, 1) >> 11) as f64 * TWO_POW_NEG_53;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
