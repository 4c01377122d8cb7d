//! Baseline receivers against independent references.

use mprx_core::baselines::{direct_mf_receiver, mfb_receiver};
use mprx_core::frame::{bit_errors, build_frame};
use mprx_core::gmsg::{Constellation, GaussMsg};
use mprx_core::phy::{gen_channel, transmit, ChannelRealization};
use mprx_core::receiver::{run_receiver, GenieAids};
use mprx_core::rng::complex_gaussian;
use mprx_core::system::SystemConfig;
use mprx_core::txchain::{decode_siso, demap, map_symbols, CodeConfig, LlrCombine};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// With M = 1, N = 1 and a unit flat channel, the matched-filter bound is
/// plain coded QPSK over AWGN; its BER at 4 dB must agree with a
/// standalone simulation of the same code within Monte-Carlo error.
#[test]
fn mfb_reduces_to_awgn_performance() {
    let lambda = 10f64.powf(0.4); // Eb/N0 = 4 dB, QPSK rate 1/2
    let code = CodeConfig::default_k7();
    let c4 = Constellation::qpsk();

    // Standalone AWGN simulation: encode, map, add noise, demap, decode.
    let mut rng = ChaCha12Rng::seed_from_u64(0xAA11);
    let sigma = (1.0 / lambda).sqrt();
    let mut awgn_errs = 0u64;
    let mut awgn_bits = 0u64;
    let info_len = 234;
    let blocks = 3000;
    for _ in 0..blocks {
        let info: Vec<u8> = (0..info_len).map(|_| (rng.next_u64() & 1) as u8).collect();
        let coded = code.encode(&info);
        let symbols = map_symbols(&coded, &c4).unwrap();
        let evidence: Vec<GaussMsg> = symbols
            .iter()
            .map(|&s| GaussMsg::new(s + complex_gaussian(&mut rng) * sigma, 1.0 / lambda))
            .collect();
        let priors = vec![0.0; coded.len()];
        let llrs = demap(&evidence, &priors, &c4, LlrCombine::Exact);
        let (_, hard) = decode_siso(&code, &llrs, LlrCombine::Exact);
        awgn_errs += bit_errors(&info, &hard) as u64;
        awgn_bits += info_len as u64;
    }

    // MFB path through the full machinery on a flat unit channel.
    let sys = SystemConfig::new(
        1,
        1,
        256,
        16,
        1,
        Constellation::qpsk(),
        CodeConfig::default_k7(),
        1,
        None,
        2,
    )
    .unwrap();
    let flat = ChannelRealization::from_taps(1, 1, 256, 1, vec![Complex64::new(1.0, 0.0)]);
    let mut mfb_errs = 0u64;
    let mut mfb_bits = 0u64;
    let frames = 2800;
    for _ in 0..frames {
        let frame = build_frame(&sys, &mut rng);
        let y = transmit(&frame.symbols, &flat, &sys.pattern, lambda, &mut rng).unwrap();
        let out = mfb_receiver(&y, &flat, lambda, &frame.symbols, &sys);
        mfb_errs += bit_errors(&frame.info_bits[0], &out.bits[0]) as u64;
        mfb_bits += frame.info_bits[0].len() as u64;
    }

    let p_awgn = awgn_errs as f64 / awgn_bits as f64;
    let p_mfb = mfb_errs as f64 / mfb_bits as f64;
    // Pooled three-sigma bound on the difference of two proportions.
    let se = (p_awgn * (1.0 - p_awgn) / awgn_bits as f64
        + p_mfb * (1.0 - p_mfb) / mfb_bits as f64)
        .sqrt();
    assert!(
        (p_awgn - p_mfb).abs() <= 3.0 * se.max(1e-6),
        "AWGN {p_awgn:.3e} ({awgn_errs}/{awgn_bits}) vs MFB {p_mfb:.3e} ({mfb_errs}/{mfb_bits})"
    );
}

/// At high SNR with a known channel and one user, the direct mean-field
/// receiver converges to the same hard decisions as the main receiver.
#[test]
fn direct_mf_agrees_with_proposed_at_high_snr() {
    let sys = SystemConfig::new(
        2,
        1,
        64,
        8,
        4,
        Constellation::qpsk(),
        CodeConfig::default_k7(),
        10,
        None,
        6,
    )
    .unwrap();
    let lambda = 10f64.powf(1.6); // 16 dB
    let mut rng = ChaCha12Rng::seed_from_u64(0x5151);
    for frame_idx in 0..50 {
        let frame = build_frame(&sys, &mut rng);
        let ch = gen_channel(&mut rng, 2, 1, 64, 4);
        let y = transmit(&frame.symbols, &ch, &sys.pattern, lambda, &mut rng).unwrap();
        let genie = GenieAids {
            channel: Some(&ch),
            lambda: Some(lambda),
        };
        let a = run_receiver(&y, &sys, genie, None).unwrap();
        let b = direct_mf_receiver(&y, &sys, genie, None).unwrap();
        assert_eq!(a.bits, b.bits, "frame {frame_idx}");
    }
}

/// Paired frames: the genie bound never loses to the main receiver.
#[test]
fn mfb_bounds_proposed_on_paired_frames() {
    let sys = SystemConfig::new(
        4,
        2,
        64,
        4,
        4,
        Constellation::qpsk(),
        CodeConfig::default_k7(),
        10,
        None,
        9,
    )
    .unwrap();
    let lambda = 10f64.powf(0.6); // 6 dB
    let mut rng = ChaCha12Rng::seed_from_u64(0x600D);
    let mut mfb_errs = 0usize;
    let mut prop_errs = 0usize;
    for _ in 0..150 {
        let frame = build_frame(&sys, &mut rng);
        let ch = gen_channel(&mut rng, 4, 2, 64, 4);
        let y = transmit(&frame.symbols, &ch, &sys.pattern, lambda, &mut rng).unwrap();
        let genie = mfb_receiver(&y, &ch, lambda, &frame.symbols, &sys);
        let prop = run_receiver(&y, &sys, GenieAids::none(), None).unwrap();
        for n in 0..2 {
            mfb_errs += bit_errors(&frame.info_bits[n], &genie.bits[n]);
            prop_errs += bit_errors(&frame.info_bits[n], &prop.bits[n]);
        }
    }
    assert!(
        mfb_errs <= prop_errs,
        "MFB errors {mfb_errs} exceed proposed errors {prop_errs}"
    );
}
