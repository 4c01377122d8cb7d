//! Seed derivation and the few random primitives the simulations need.
//!
//! Everything routes through splitmix64 or the caller's [`RngCore`], so a
//! given seed reproduces bit-identical streams on any platform.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand_core::RngCore;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Advance `state` by the splitmix64 increment and return the next output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold an ordered tuple of values into one 64-bit seed: xor each part into
/// the running splitmix64 state and take the last output.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut state = 0u64;
    let mut out = 0u64;
    for &p in parts {
        state ^= p;
        out = splitmix64(&mut state);
    }
    out
}

/// Fisher-Yates permutation of `0..len` driven by a splitmix64 stream
/// seeded with `seed`: for `i = len-1 .. 1`, draw `j = next % (i + 1)` and
/// swap positions `i` and `j`.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut state = seed;
    let mut p: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        let j = (splitmix64(&mut state) % (i as u64 + 1)) as usize;
        p.swap(i, j);
    }
    p
}

/// One CN(0, 1) draw via Box-Muller: two 53-bit uniforms from `rng`
/// (radius first, then angle), `E|z|^2 = 1`.
pub fn complex_gaussian(rng: &mut impl RngCore) -> Complex64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE; // in (0, 1]
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE; // in [0, 1)
    let r = (-u1.ln()).sqrt();
    let theta = TAU * u2;
    Complex64::new(r * theta.cos(), r * theta.sin())
}

/// One uniform bit from `rng` (the top bit of the next word).
pub fn random_bit(rng: &mut impl RngCore) -> u8 {
    (rng.next_u64() >> 63) as u8
}
