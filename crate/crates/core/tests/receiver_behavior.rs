//! Whole-receiver behavior: sanity limits, pilot pinning, clamp audits,
//! and convergence trends.

use mprx_core::frame::build_frame;
use mprx_core::gmsg::Constellation;
use mprx_core::phy::{gen_channel, transmit};
use mprx_core::receiver::{
    run_receiver, GenieAids, ReceiverState, RxWorkspace, Truth, VAR_CEILING,
};
use mprx_core::system::SystemConfig;
use mprx_core::txchain::CodeConfig;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn sys(
    m: usize,
    n: usize,
    k: usize,
    kp: usize,
    l: usize,
    iterations: usize,
) -> SystemConfig {
    SystemConfig::new(
        m,
        n,
        k,
        kp,
        l,
        Constellation::qpsk(),
        CodeConfig::default_k7(),
        iterations,
        None,
        5,
    )
    .unwrap()
}

#[test]
fn noiseless_known_channel_single_user_is_error_free() {
    let cfg = sys(2, 1, 64, 8, 4, 5);
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    for frame_idx in 0..1000 {
        let frame = build_frame(&cfg, &mut rng);
        let ch = gen_channel(&mut rng, 2, 1, 64, 4);
        let y = transmit(&frame.symbols, &ch, &cfg.pattern, f64::INFINITY, &mut rng).unwrap();
        let genie = GenieAids {
            channel: Some(&ch),
            lambda: Some(1e9),
        };
        let out = run_receiver(&y, &cfg, genie, None).unwrap();
        assert_eq!(out.bits, frame.info_bits, "frame {frame_idx}");
    }
}

/// Pilot and silence beliefs are pinned by the schedule: no iteration may
/// touch them. Belief variances stay inside the clamp ceiling throughout.
#[test]
fn pilot_beliefs_pinned_and_variances_bounded() {
    let cfg = sys(4, 2, 64, 4, 4, 15);
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    let frame = build_frame(&cfg, &mut rng);
    let ch = gen_channel(&mut rng, 4, 2, 64, 4);
    let lambda = 4.0; // around 6 dB
    let y = transmit(&frame.symbols, &ch, &cfg.pattern, lambda, &mut rng).unwrap();

    let ws = RxWorkspace::new(&cfg);
    let genie = GenieAids::none();
    let mut state = ReceiverState::new(&cfg, &ws, &y, &genie);
    let pilot = mprx_core::phy::pilot_symbol();
    for iteration in 0..cfg.iterations {
        state.iterate(&y, &cfg, &ws, &genie).unwrap();
        for n in 0..2 {
            for k in 0..64 {
                let i = state.nk(n, k);
                match cfg.pattern.owner(k) {
                    Some(owner) if owner == n => {
                        assert_eq!(state.x_mean[i], pilot, "iteration {iteration}");
                        assert_eq!(state.x_var[i], 0.0);
                    }
                    Some(_) => {
                        assert_eq!(state.x_mean[i].norm(), 0.0);
                        assert_eq!(state.x_var[i], 0.0);
                    }
                    None => {
                        assert!(state.x_var[i] >= 0.0 && state.x_var[i] <= VAR_CEILING);
                    }
                }
            }
        }
        for idx in 0..4 * 2 * 64 {
            let hb = state.h_belief[idx];
            assert!(hb.var >= 0.0 && hb.var <= VAR_CEILING, "h belief variance");
            let zb = state.z_belief[idx];
            assert!(zb.var >= 0.0 && zb.var <= 4.0 * VAR_CEILING * VAR_CEILING);
            // Extrinsics may be vacuous but never negative-variance.
            assert!(state.vec_z[idx].var >= 0.0);
            assert!(state.cev_z[idx].var >= 0.0);
        }
        assert!(state.lambda_hat > 0.0 && state.lambda_hat <= VAR_CEILING);
    }
}

/// At high SNR the average channel NMSE must not degrade across
/// iterations (0.1 dB tolerance for Monte-Carlo noise).
#[test]
fn nmse_monotone_at_high_snr() {
    let cfg = sys(4, 2, 256, 16, 8, 15);
    let lambda = 10f64.powf(1.2); // 12 dB for QPSK rate 1/2
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    let frames = 40;
    let mut nmse_linear = vec![0.0f64; cfg.iterations];
    for _ in 0..frames {
        let frame = build_frame(&cfg, &mut rng);
        let ch = gen_channel(&mut rng, 4, 2, 256, 8);
        let y = transmit(&frame.symbols, &ch, &cfg.pattern, lambda, &mut rng).unwrap();
        let truth = Truth {
            channel: &ch,
            info_bits: &frame.info_bits,
        };
        let out = run_receiver(&y, &cfg, GenieAids::none(), Some(truth)).unwrap();
        for (it, diag) in out.iterations.iter().enumerate() {
            nmse_linear[it] += 10f64.powf(diag.nmse_db.unwrap() / 10.0);
        }
    }
    let db: Vec<f64> = nmse_linear
        .iter()
        .map(|&s| 10.0 * (s / frames as f64).log10())
        .collect();
    for w in db.windows(2) {
        assert!(
            w[1] <= w[0] + 0.1,
            "NMSE rose from {:.2} dB to {:.2} dB (trace {db:?})",
            w[0],
            w[1]
        );
    }
}

/// Iterating helps: by iteration 15 the BER at 8 dB is strictly below the
/// first iteration's BER.
#[test]
fn iterations_reduce_ber_at_moderate_snr() {
    let cfg = sys(4, 2, 256, 16, 8, 15);
    let lambda = 10f64.powf(0.8); // 8 dB
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let frames = 500;
    let mut first = 0u64;
    let mut last = 0u64;
    let mut bits = 0u64;
    for _ in 0..frames {
        let frame = build_frame(&cfg, &mut rng);
        let ch = gen_channel(&mut rng, 4, 2, 256, 8);
        let y = transmit(&frame.symbols, &ch, &cfg.pattern, lambda, &mut rng).unwrap();
        let truth = Truth {
            channel: &ch,
            info_bits: &frame.info_bits,
        };
        let out = run_receiver(&y, &cfg, GenieAids::none(), Some(truth)).unwrap();
        let total: usize = frame.info_bits.iter().map(|b| b.len()).sum();
        bits += total as u64;
        first += (out.iterations[0].ber.unwrap() * total as f64).round() as u64;
        last += (out.iterations[14].ber.unwrap() * total as f64).round() as u64;
    }
    assert!(
        last < first,
        "iteration 15 BER {} / {bits} not below iteration 1 BER {} / {bits}",
        last,
        first
    );
}

/// A frame that is all pilots for one user drives the estimator to the
/// pilot-only LMMSE solution; the clamp trace stays quiet and lambda
/// converges near truth.
#[test]
fn pilot_only_frame_estimates_channel_and_lambda() {
    let cfg = sys(2, 1, 64, 64, 8, 15);
    assert_eq!(cfg.info_bits_per_user(), 0);
    let lambda = 10.0;
    let mut rng = ChaCha12Rng::seed_from_u64(55);
    let mut lambda_err = 0.0;
    let frames = 50;
    let mut nmse_acc = 0.0;
    for _ in 0..frames {
        let frame = build_frame(&cfg, &mut rng);
        let ch = gen_channel(&mut rng, 2, 1, 64, 8);
        let y = transmit(&frame.symbols, &ch, &cfg.pattern, lambda, &mut rng).unwrap();
        let out = run_receiver(&y, &cfg, GenieAids::none(), None).unwrap();
        assert!(out.bits.iter().all(|b| b.is_empty()));
        nmse_acc += 10f64.powf(out.h_belief.nmse_db(&ch) / 10.0);
        lambda_err += (out.lambda_hat - lambda).abs() / lambda;
    }
    let nmse_db = 10.0 * (nmse_acc / frames as f64).log10();
    // 64 pilot observations of 8 taps at 10 dB: roughly -19 dB NMSE.
    assert!(nmse_db < -15.0, "pilot-only NMSE {nmse_db:.2} dB");
    let mean_lambda_err = lambda_err / frames as f64;
    assert!(mean_lambda_err < 0.25, "lambda rel err {mean_lambda_err:.3}");
}
