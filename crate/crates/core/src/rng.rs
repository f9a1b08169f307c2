//! Keyed random streams.
//!
//! Every random draw in a scenario comes from a ChaCha8 stream whose key is
//! derived from `(seed, domain, index, substream)`. Samples can therefore be
//! generated in any order, or concurrently, and still be bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::C64;

/// Stream domains. Training and evaluation draws never share a stream.
pub mod domain {
    pub const TRAIN: u64 = 0x7452_4149_4e00_0001;
    pub const EVAL: u64 = 0x4556_414c_0000_0002;
    pub const BEAMS: u64 = 0x4245_414d_0000_0003;
    pub const TEST: u64 = 0x5445_5354_0000_0004;
}

/// Sub-stream identifiers inside a sample.
pub mod substream {
    pub const UE_POSITIONS: u64 = 1;
    /// Link `i` uses `LINK_BASE + i`.
    pub const LINK_BASE: u64 = 1 << 32;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for the given key.
pub fn stream_rng(seed: u64, domain: u64, index: u64, sub: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut mix = 0u64;
    for word in [domain, index, sub] {
        mix ^= splitmix64(&mut state);
        state ^= word.wrapping_mul(0xd6e8_feb8_6659_fd93);
        mix = mix.rotate_left(17) ^ splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).wrapping_add(mix).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Circularly-symmetric complex Gaussian, zero mean, unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Uniform on `[0, 1)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
