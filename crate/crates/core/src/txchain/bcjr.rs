//! Forward-backward (BCJR) decoding over the terminated code trellis.
//!
//! Works in the log domain. The trellis structure is exploited so the
//! forward pass does one two-way log-sum-exp per destination state (its
//! two predecessors share the same input bit, the top bit of the state),
//! and the per-step posterior pass shares a single normalizer across all
//! transitions, reducing the transcendental count without approximating.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::{clamp_llr, BitLlr, CodeConfig, LlrCombine};

struct Trellis {
    states: usize,
    /// coded-bit pair index `c1 << 1 | c2` per (s << 1) | b
    combo: Vec<usize>,
    /// next[(s << 1) | b]
    next: Vec<usize>,
}

impl Trellis {
    fn new(code: &CodeConfig) -> Self {
        let mem = code.memory();
        let states = 1usize << mem;
        let [g1, g2] = code.generators();
        let mut combo = vec![0usize; states * 2];
        let mut next = vec![0usize; states * 2];
        for s in 0..states {
            for b in 0..2usize {
                let reg = ((b as u32) << mem) | s as u32;
                let c1 = (reg & g1).count_ones() & 1;
                let c2 = (reg & g2).count_ones() & 1;
                combo[(s << 1) | b] = ((c1 << 1) | c2) as usize;
                next[(s << 1) | b] = (reg >> 1) as usize;
            }
        }
        Self { states, combo, next }
    }
}

#[inline]
fn lse2(mode: LlrCombine, a: f64, b: f64) -> f64 {
    match mode {
        LlrCombine::MaxLog => a.max(b),
        LlrCombine::Exact => {
            if a == f64::NEG_INFINITY {
                b
            } else if b == f64::NEG_INFINITY {
                a
            } else {
                a.max(b) + (-(a - b).abs()).exp().ln_1p()
            }
        }
    }
}

/// Soft-in soft-out decode of one terminated block.
///
/// `coded_llrs` holds two LLRs per trellis step. Returns extrinsic LLRs on
/// every coded bit (posterior minus input, clamped) and hard decisions on
/// the information bits.
pub fn decode_siso(
    code: &CodeConfig,
    coded_llrs: &[BitLlr],
    mode: LlrCombine,
) -> (Vec<BitLlr>, Vec<u8>) {
    assert_eq!(coded_llrs.len() % 2, 0);
    let steps = coded_llrs.len() / 2;
    let mem = code.memory();
    assert!(steps >= mem, "block shorter than the termination tail");
    let info_len = steps - mem;
    let trellis = Trellis::new(code);
    let s_count = trellis.states;
    let half = s_count / 2;

    // Branch metrics: 0.5 * sum_j (1 - 2 c_j) * llr_j per bit pair.
    let mut gammas = vec![[0.0f64; 4]; steps];
    for t in 0..steps {
        let l1 = coded_llrs[2 * t];
        let l2 = coded_llrs[2 * t + 1];
        for (cmb, g) in gammas[t].iter_mut().enumerate() {
            let c1 = (cmb >> 1) as f64;
            let c2 = (cmb & 1) as f64;
            *g = 0.5 * ((1.0 - 2.0 * c1) * l1 + (1.0 - 2.0 * c2) * l2);
        }
    }

    // Destination state j has exactly two predecessors, both with input
    // bit j >> (mem - 1): the states (j & (half-1)) * 2 and its neighbor.
    let mut alpha = vec![f64::NEG_INFINITY; (steps + 1) * s_count];
    alpha[0] = 0.0;
    for t in 0..steps {
        let g = &gammas[t];
        let (head, tail) = alpha.split_at_mut((t + 1) * s_count);
        let cur = &head[t * s_count..];
        let nxt = &mut tail[..s_count];
        let terminated = t >= info_len;
        let mut peak = f64::NEG_INFINITY;
        for (j, slot) in nxt.iter_mut().enumerate() {
            let b = j >> (mem - 1);
            if terminated && b == 1 {
                *slot = f64::NEG_INFINITY;
                continue;
            }
            let s0 = (j & (half - 1)) << 1;
            let s1 = s0 | 1;
            let v = lse2(
                mode,
                cur[s0] + g[trellis.combo[(s0 << 1) | b]],
                cur[s1] + g[trellis.combo[(s1 << 1) | b]],
            );
            *slot = v;
            peak = peak.max(v);
        }
        for v in nxt.iter_mut() {
            *v -= peak;
        }
    }

    let mut beta = vec![f64::NEG_INFINITY; (steps + 1) * s_count];
    beta[steps * s_count] = 0.0; // terminated in the zero state
    for t in (0..steps).rev() {
        let g = &gammas[t];
        let inputs = if t >= info_len { 1 } else { 2 };
        let (head, tail) = beta.split_at_mut((t + 1) * s_count);
        let cur = &mut head[t * s_count..];
        let nxt = &tail[..s_count];
        let mut peak = f64::NEG_INFINITY;
        for (s, slot) in cur.iter_mut().enumerate() {
            let mut acc = f64::NEG_INFINITY;
            for b in 0..inputs {
                let e = (s << 1) | b;
                acc = lse2(mode, acc, g[trellis.combo[e]] + nxt[trellis.next[e]]);
            }
            *slot = acc;
            peak = peak.max(acc);
        }
        if peak > f64::NEG_INFINITY {
            for v in cur.iter_mut() {
                *v -= peak;
            }
        }
    }

    // Posterior pass: per step, score all transitions once, then reduce
    // into coded-bit and input-bit groups under one shared normalizer
    // (exact: the normalizer cancels in every LLR).
    let mut extrinsic = Vec::with_capacity(coded_llrs.len());
    let mut hard = Vec::with_capacity(info_len);
    let mut weights = vec![f64::NEG_INFINITY; s_count * 2];
    for t in 0..steps {
        let g = &gammas[t];
        let inputs = if t >= info_len { 1 } else { 2 };
        let a = &alpha[t * s_count..(t + 1) * s_count];
        let bt = &beta[(t + 1) * s_count..(t + 2) * s_count];
        let mut w_max = f64::NEG_INFINITY;
        for (s, &alpha_s) in a.iter().enumerate() {
            for b in 0..inputs {
                let e = (s << 1) | b;
                let w = alpha_s + g[trellis.combo[e]] + bt[trellis.next[e]];
                weights[e] = w;
                w_max = w_max.max(w);
            }
        }
        // Sums (or maxima, for max-log) per coded-bit pair and per input.
        let mut by_combo = [f64::NEG_INFINITY; 4];
        let mut by_input = [f64::NEG_INFINITY; 2];
        match mode {
            LlrCombine::Exact => {
                let mut combo_sum = [0.0f64; 4];
                let mut input_sum = [0.0f64; 2];
                for s in 0..s_count {
                    for (b, inp) in input_sum.iter_mut().enumerate().take(inputs) {
                        let e = (s << 1) | b;
                        let ex = (weights[e] - w_max).exp();
                        combo_sum[trellis.combo[e]] += ex;
                        *inp += ex;
                    }
                }
                for (dst, &src) in by_combo.iter_mut().zip(&combo_sum) {
                    *dst = src.ln();
                }
                for (dst, &src) in by_input.iter_mut().zip(&input_sum) {
                    *dst = src.ln();
                }
            }
            LlrCombine::MaxLog => {
                for s in 0..s_count {
                    for (b, inp) in by_input.iter_mut().enumerate().take(inputs) {
                        let e = (s << 1) | b;
                        let cmb = trellis.combo[e];
                        by_combo[cmb] = by_combo[cmb].max(weights[e]);
                        *inp = inp.max(weights[e]);
                    }
                }
            }
        }
        let bit0 = lse2(mode, by_combo[0], by_combo[1]) - lse2(mode, by_combo[2], by_combo[3]);
        let bit1 = lse2(mode, by_combo[0], by_combo[2]) - lse2(mode, by_combo[1], by_combo[3]);
        extrinsic.push(clamp_llr(bit0 - coded_llrs[2 * t]));
        extrinsic.push(clamp_llr(bit1 - coded_llrs[2 * t + 1]));
        if t < info_len {
            hard.push((by_input[0] < by_input[1]) as u8);
        }
    }
    (extrinsic, hard)
}
