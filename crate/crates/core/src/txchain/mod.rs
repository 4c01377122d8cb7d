//! Bit-level transmit chain and its soft inverse.
//!
//! Encoder: terminated rate-1/2 feedforward convolutional code, default
//! generators (133, 171) octal with constraint length 7. Interleaver: a
//! seeded Fisher-Yates permutation. Mapper: Gray-labeled constellations
//! from [`crate::gmsg`]. The receive side works in the log-likelihood
//! domain: an exact (or max-log) demapper against Gaussian symbol
//! evidence, the forward-backward decoder behind [`decode_siso`], and
//! conversion of coded-bit extrinsics back into per-symbol discrete
//! priors.
//!
//! LLR convention: `llr = log P(bit = 0) - log P(bit = 1)`, clamped to
//! [`LLR_CLAMP`] before leaving any operation.

mod bcjr;

pub use bcjr::decode_siso;

use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::gmsg::{Constellation, DiscreteMsg, GaussMsg};
use crate::rng::permutation;

/// Magnitude bound on every LLR leaving the demapper or decoder.
pub const LLR_CLAMP: f64 = 30.0;

/// A bit log-likelihood ratio, `log P(0)/P(1)`.
pub type BitLlr = f64;

pub fn clamp_llr(l: f64) -> f64 {
    l.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// How multi-term log-domain sums are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlrCombine {
    /// Exact log-sum-exp.
    Exact,
    /// Max-log approximation.
    MaxLog,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxError {
    /// Bit count not divisible by bits per symbol.
    LengthMismatch {
        bits: usize,
        bits_per_symbol: usize,
    },
    /// Generators share a non-trivial GF(2) factor.
    CatastrophicGenerators { generators: [u32; 2] },
    /// Generator polynomials out of range for the constraint length.
    InvalidGenerators { constraint_length: usize },
}

impl fmt::Display for TxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxError::LengthMismatch { bits, bits_per_symbol } => {
                write!(f, "{bits} bits do not divide into {bits_per_symbol}-bit symbols")
            }
            TxError::CatastrophicGenerators { generators } => write!(
                f,
                "generator pair ({:o}, {:o}) is catastrophic",
                generators[0], generators[1]
            ),
            TxError::InvalidGenerators { constraint_length } => {
                write!(f, "generators out of range for constraint length {constraint_length}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TxError {}

/// Rate-1/2 terminated convolutional code description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeConfig {
    constraint_length: usize,
    generators: [u32; 2],
}

/// Generator pairs known to be non-catastrophic, skipping the GF(2) check.
const KNOWN_GOOD: &[(usize, [u32; 2])] = &[(7, [0o133, 0o171])];

impl CodeConfig {
    /// Validate and build a code. Generators are plain integers whose bits
    /// are the polynomial coefficients, MSB on the current input bit.
    pub fn new(constraint_length: usize, generators: [u32; 2]) -> Result<Self, TxError> {
        if !(2..=16).contains(&constraint_length) {
            return Err(TxError::InvalidGenerators { constraint_length });
        }
        let top = 1u32 << (constraint_length - 1);
        let limit = 1u32 << constraint_length;
        if generators.iter().any(|&g| g == 0 || g >= limit) || generators.iter().all(|&g| g & top == 0)
        {
            return Err(TxError::InvalidGenerators { constraint_length });
        }
        let code = Self {
            constraint_length,
            generators,
        };
        if KNOWN_GOOD.contains(&(constraint_length, generators)) {
            return Ok(code);
        }
        // Non-catastrophic iff the GF(2) gcd of the generators is a power
        // of x (a pure delay).
        if !gf2_gcd(generators[0], generators[1]).is_power_of_two() {
            return Err(TxError::CatastrophicGenerators { generators });
        }
        Ok(code)
    }

    /// The (133, 171) octal, constraint-length-7 default.
    pub fn default_k7() -> Self {
        Self::new(7, [0o133, 0o171]).unwrap()
    }

    pub fn constraint_length(&self) -> usize {
        self.constraint_length
    }

    pub fn generators(&self) -> [u32; 2] {
        self.generators
    }

    /// Shift-register memory (tail length).
    pub fn memory(&self) -> usize {
        self.constraint_length - 1
    }

    pub fn coded_len(&self, info_len: usize) -> usize {
        2 * (info_len + self.memory())
    }

    /// Info length for a given coded length, if consistent.
    pub fn info_len(&self, coded_len: usize) -> Option<usize> {
        let steps = coded_len / 2;
        (coded_len.is_multiple_of(2) && steps >= self.memory()).then(|| steps - self.memory())
    }

    /// Encode and terminate: the registers are flushed back to the zero
    /// state with `memory()` trailing zeros, two coded bits per step.
    pub fn encode(&self, info_bits: &[u8]) -> Vec<u8> {
        let mem = self.memory();
        let mut state = 0u32;
        let mut out = Vec::with_capacity(self.coded_len(info_bits.len()));
        for step in 0..info_bits.len() + mem {
            let bit = if step < info_bits.len() { info_bits[step] as u32 } else { 0 };
            let reg = (bit << mem) | state;
            for g in self.generators {
                out.push(((reg & g).count_ones() & 1) as u8);
            }
            state = reg >> 1;
        }
        out
    }
}

fn gf2_mod(mut a: u32, b: u32) -> u32 {
    let db = 31 - b.leading_zeros();
    while a != 0 {
        let da = 31 - a.leading_zeros();
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

fn gf2_gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let r = gf2_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// A fixed pseudorandom permutation and its inverse.
#[derive(Debug, Clone)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        Self {
            perm: permutation(len, seed),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `out[i] = x[perm[i]]`.
    pub fn interleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len());
        self.perm.iter().map(|&i| x[i]).collect()
    }

    /// Inverse of [`Interleaver::interleave`]: `out[perm[i]] = x[i]`.
    pub fn deinterleave<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len());
        let mut out = alloc::vec![T::default(); x.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        out
    }
}

/// Map bits onto constellation points, most significant bit first.
pub fn map_symbols(bits: &[u8], c: &Constellation) -> Result<Vec<Complex64>, TxError> {
    let bps = c.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(TxError::LengthMismatch {
            bits: bits.len(),
            bits_per_symbol: bps,
        });
    }
    Ok(bits
        .chunks_exact(bps)
        .map(|chunk| c.point(c.label_of_bits(chunk)))
        .collect())
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Extrinsic bit LLRs from Gaussian symbol evidence and coded-bit priors.
///
/// For each bit of each symbol the constellation is scored by
/// `-|s - mean|^2 / var` plus the priors of the *other* bits of that
/// symbol; the evidence contributes nothing when vacuous. Priors enter as
/// `(1 - 2b) llr / 2`.
pub fn demap(
    evidence: &[GaussMsg],
    prior_llrs: &[BitLlr],
    c: &Constellation,
    mode: LlrCombine,
) -> Vec<BitLlr> {
    let bps = c.bits_per_symbol();
    let q = c.size();
    assert_eq!(prior_llrs.len(), evidence.len() * bps);
    let mut out = Vec::with_capacity(prior_llrs.len());
    let mut scores = alloc::vec![0.0f64; q];
    for (i, ev) in evidence.iter().enumerate() {
        debug_assert!(ev.var > 0.0);
        let priors = &prior_llrs[i * bps..(i + 1) * bps];
        for (label, score) in scores.iter_mut().enumerate() {
            let metric = if ev.var.is_infinite() {
                0.0
            } else {
                -(c.point(label) - ev.mean).norm_sqr() / ev.var
            };
            let prior: f64 = (0..bps)
                .map(|j| {
                    let sign = 1.0 - 2.0 * c.bit_of(label, j) as f64;
                    sign * priors[j] * 0.5
                })
                .sum();
            *score = metric + prior;
        }
        for (j, &prior_j) in priors.iter().enumerate() {
            let mut num = f64::NEG_INFINITY;
            let mut den = f64::NEG_INFINITY;
            for (label, &score) in scores.iter().enumerate() {
                // Remove this bit's own prior: extrinsic only.
                let sign = 1.0 - 2.0 * c.bit_of(label, j) as f64;
                let s = score - sign * prior_j * 0.5;
                let acc = if c.bit_of(label, j) == 0 { &mut num } else { &mut den };
                *acc = match mode {
                    LlrCombine::Exact => logsumexp2(*acc, s),
                    LlrCombine::MaxLog => acc.max(s),
                };
            }
            out.push(clamp_llr(num - den));
        }
    }
    out
}

/// Per-symbol discrete priors from coded-bit extrinsic LLRs:
/// `w(label) = prod_j P(bit_j = label_j)`, normalized.
pub fn symbol_prior(extrinsic_llrs: &[BitLlr], c: &Constellation) -> Vec<DiscreteMsg> {
    let bps = c.bits_per_symbol();
    let q = c.size();
    assert_eq!(extrinsic_llrs.len() % bps, 0);
    let mut out = Vec::with_capacity(extrinsic_llrs.len() / bps);
    for chunk in extrinsic_llrs.chunks_exact(bps) {
        let mut logw = alloc::vec![0.0f64; q];
        for (label, lw) in logw.iter_mut().enumerate() {
            for (j, &llr) in chunk.iter().enumerate() {
                // log P(0) = -softplus(-llr), log P(1) = -softplus(llr)
                *lw -= if c.bit_of(label, j) == 0 { softplus(-llr) } else { softplus(llr) };
            }
        }
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut msg = DiscreteMsg::new(logw.iter().map(|&lw| (lw - max).exp()).collect());
        msg.normalize().expect("finite llrs yield nonzero weights");
        out.push(msg);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn all_zero_input_encodes_to_zero() {
        let code = CodeConfig::default_k7();
        let out = code.encode(&[0; 40]);
        assert_eq!(out.len(), 2 * 46);
        assert!(out.iter().all(|&b| b == 0));
    }

    /// Hand-run of the shift register: a single 1 followed by zeros walks
    /// the impulse through both polynomials, so step t outputs bit t of
    /// each generator, MSB first. 133 octal = 1011011b, 171 = 1111001b.
    #[test]
    fn impulse_response_matches_generators() {
        let code = CodeConfig::default_k7();
        let out = code.encode(&[1, 0, 0, 0, 0, 0, 0]);
        let g1 = [1, 0, 1, 1, 0, 1, 1];
        let g2 = [1, 1, 1, 1, 0, 0, 1];
        for t in 0..7 {
            assert_eq!(out[2 * t], g1[t], "g1 bit {t}");
            assert_eq!(out[2 * t + 1], g2[t], "g2 bit {t}");
        }
        // Tail: register is already flushed after 7 steps.
        assert!(out[14..].iter().all(|&b| b == 0));
    }

    #[test]
    fn noiseless_roundtrip_recovers_info() {
        let code = CodeConfig::default_k7();
        let mut state = 0xDEADu64;
        for _ in 0..50 {
            let info: Vec<u8> = (0..64)
                .map(|_| (crate::rng::splitmix64(&mut state) & 1) as u8)
                .collect();
            let coded = code.encode(&info);
            let llrs: Vec<f64> = coded.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
            let (_, hard) = decode_siso(&code, &llrs, LlrCombine::Exact);
            assert_eq!(hard, info);
        }
    }

    #[test]
    fn rejects_catastrophic_pair() {
        // (6, 6) octal share the factor x^2 + x: textbook catastrophic.
        assert!(matches!(
            CodeConfig::new(3, [0b110, 0b110]),
            Err(TxError::CatastrophicGenerators { .. })
        ));
        // (7, 5) octal is the standard K=3 non-catastrophic pair.
        assert!(CodeConfig::new(3, [0b111, 0b101]).is_ok());
    }

    #[test]
    fn interleaver_roundtrip_and_determinism() {
        let il = Interleaver::new(97, 5);
        let mut state = 1u64;
        let data: Vec<u8> = (0..97)
            .map(|_| (crate::rng::splitmix64(&mut state) & 1) as u8)
            .collect();
        assert_eq!(il.deinterleave(&il.interleave(&data)), data);
        let il2 = Interleaver::new(97, 5);
        assert_eq!(il.interleave(&data), il2.interleave(&data));
    }

    #[test]
    fn qpsk_mapping_table() {
        let c4 = Constellation::qpsk();
        let s = map_symbols(&[0, 0], &c4).unwrap();
        let a = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(s[0].re, a, epsilon = 1e-15);
        assert_relative_eq!(s[0].im, a, epsilon = 1e-15);
        for label in 0..4 {
            let bits = [(label >> 1) as u8, (label & 1) as u8];
            assert_relative_eq!(map_symbols(&bits, &c4).unwrap()[0].norm(), 1.0, epsilon = 1e-12);
        }
        assert!(matches!(
            map_symbols(&[0, 1, 0], &c4),
            Err(TxError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn demap_point_evidence_saturates_toward_label() {
        let c4 = Constellation::qpsk();
        for label in 0..4 {
            let ev = [GaussMsg::new(c4.point(label), 1e-6)];
            let llrs = demap(&ev, &[0.0, 0.0], &c4, LlrCombine::Exact);
            for (j, &l) in llrs.iter().enumerate() {
                assert_eq!(l.abs(), LLR_CLAMP);
                let bit = c4.bit_of(label, j);
                assert_eq!(l > 0.0, bit == 0, "label {label} bit {j}");
            }
        }
    }

    #[test]
    fn demap_vacuous_evidence_is_silent() {
        let c4 = Constellation::qpsk();
        let llrs = demap(&[GaussMsg::vacuous()], &[0.4, -1.2], &c4, LlrCombine::Exact);
        // Gray QPSK bits are independent, so extrinsics vanish even with
        // nonzero priors on the other bit.
        for l in llrs {
            assert!(l.abs() < 1e-12, "llr = {l}");
        }
    }

    /// Brute-force 4-term posterior oracle for the QPSK demapper.
    #[test]
    fn demap_matches_direct_posterior_sum() {
        let c4 = Constellation::qpsk();
        let ev = GaussMsg::new(Complex64::new(0.3, 0.1), 0.5);
        let priors = [0.7, -0.4];
        let llrs = demap(&[ev], &priors, &c4, LlrCombine::Exact);
        for j in 0..2 {
            let mut num = 0.0;
            let mut den = 0.0;
            for label in 0..4 {
                let like = (-(c4.point(label) - ev.mean).norm_sqr() / ev.var).exp();
                let mut w = like;
                for jp in 0..2 {
                    if jp == j {
                        continue; // extrinsic excludes the bit's own prior
                    }
                    let p0 = 1.0 / (1.0 + (-priors[jp]).exp());
                    w *= if c4.bit_of(label, jp) == 0 { p0 } else { 1.0 - p0 };
                }
                if c4.bit_of(label, j) == 0 {
                    num += w;
                } else {
                    den += w;
                }
            }
            assert_relative_eq!(llrs[j], (num / den).ln(), max_relative = 1e-10);
        }
    }

    #[test]
    fn symbol_prior_uniform_and_saturated() {
        let c4 = Constellation::qpsk();
        let uniform = symbol_prior(&[0.0, 0.0], &c4).remove(0);
        for w in &uniform.weights {
            assert_relative_eq!(*w, 0.25, epsilon = 1e-12);
        }
        let hard = symbol_prior(&[LLR_CLAMP, -LLR_CLAMP], &c4).remove(0);
        assert_eq!(hard.argmax(), c4.label_of_bits(&[0, 1]));
        assert!(hard.weights[hard.argmax()] > 1.0 - 1e-12);
    }

    #[test]
    fn symbol_prior_matches_direct_product() {
        let c4 = Constellation::qpsk();
        let llrs = [1.0, -0.5];
        let msg = symbol_prior(&llrs, &c4).remove(0);
        let p = |llr: f64, bit: u8| {
            let p0 = 1.0 / (1.0 + (-llr).exp());
            if bit == 0 {
                p0
            } else {
                1.0 - p0
            }
        };
        let mut expect: Vec<f64> = (0..4)
            .map(|label| p(llrs[0], c4.bit_of(label, 0)) * p(llrs[1], c4.bit_of(label, 1)))
            .collect();
        let total: f64 = expect.iter().sum();
        for w in &mut expect {
            *w /= total;
        }
        for (got, want) in msg.weights.iter().zip(&expect) {
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }
}
