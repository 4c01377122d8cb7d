//! Validation suites: independent oracles (numerical quadrature,
//! Monte-Carlo sampling, dense linear algebra, exhaustive enumeration) run
//! against the closed-form implementations, plus end-to-end ordering,
//! scaling, and determinism checks.
//!
//! `mprx check` runs the quick variants; the acceptance test target runs
//! the full-size ones. Oracles here never call the closed forms they
//! audit: moments come from grids, dense solves come from `nalgebra`, and
//! codeword marginals come from enumerating the codebook.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use mprx_core::frame::build_frame;
use mprx_core::gmsg::{self, Constellation, GaussMsg};
use mprx_core::phy::{gen_channel, pilot_symbol, transmit};
use mprx_core::receiver::{
    self, msg_fz_to_h, msg_fz_to_x, run_receiver, DftTable, GenieAids, ReceiverState, RxWorkspace,
};
use mprx_core::rng::complex_gaussian;
use mprx_core::system::SystemConfig;
use mprx_core::txchain::{decode_siso, CodeConfig, LlrCombine};

use crate::config::{ReceiverKind, SimConfig};
use crate::sweep::{run_sweep, run_sweep_collect};

/// Outcome of one validation suite.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl CheckReport {
    fn finish(name: &'static str, started: Instant, budget_s: f64, result: Result<String, String>) -> Self {
        let elapsed_s = started.elapsed().as_secs_f64();
        let (mut passed, mut detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if elapsed_s > budget_s {
            passed = false;
            detail = format!("{detail}; exceeded {budget_s:.0} s budget");
        }
        Self {
            name,
            passed,
            detail,
            elapsed_s,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} ({}, {:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed_s
        )
    }
}

fn uniform(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

fn log_uniform(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    uniform(rng, lo.ln(), hi.ln()).exp()
}

fn rand_complex(rng: &mut ChaCha12Rng, radius: f64) -> Complex64 {
    Complex64::new(uniform(rng, -radius, radius), uniform(rng, -radius, radius))
}

/// Error of `got` against `want` relative to the larger of `want`'s own
/// magnitude and `scale`.
fn rel_err(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale).max(1e-300)
}

fn rel_err_c(got: Complex64, want: Complex64, scale: f64) -> f64 {
    (got - want).norm() / want.norm().max(scale).max(1e-300)
}

// ---------------------------------------------------------------------------
// Blackbox grid moments
// ---------------------------------------------------------------------------

/// Mean and variance of the density `exp(logf)` over the complex plane by
/// numerical quadrature.
///
/// A coarse scan over `[-80, 80]^2` locates the peak; per-axis finite
/// differences (exact for the quadratic exponents arising here) give the
/// curvature and a Newton-refined center; a fine 81-point-per-axis grid
/// spanning 6.5 sigma then integrates the moments.
pub fn grid_moments(logf: &dyn Fn(Complex64) -> f64) -> (Complex64, f64) {
    // Coarse argmax.
    let coarse_n = 161;
    let coarse_step = 1.0;
    let mut best = (f64::NEG_INFINITY, Complex64::new(0.0, 0.0));
    for i in 0..coarse_n {
        let re = -80.0 + i as f64 * coarse_step;
        for j in 0..coarse_n {
            let x = Complex64::new(re, -80.0 + j as f64 * coarse_step);
            let v = logf(x);
            if v > best.0 {
                best = (v, x);
            }
        }
    }
    let x0 = best.1;

    // Per-axis curvature and Newton step.
    let delta = 1.0;
    let axis = |dir: Complex64| {
        let fp = logf(x0 + dir * delta);
        let f0 = logf(x0);
        let fm = logf(x0 - dir * delta);
        let second = (fp - 2.0 * f0 + fm) / (delta * delta);
        let first = (fp - fm) / (2.0 * delta);
        debug_assert!(second < 0.0, "non-concave exponent");
        (-first / second, -2.0 / second) // (newton offset, variance)
    };
    let (dre, var_re) = axis(Complex64::new(1.0, 0.0));
    let (dim, var_im) = axis(Complex64::new(0.0, 1.0));
    let center = x0 + Complex64::new(dre, dim);
    let sig_re = (var_re / 2.0).sqrt();
    let sig_im = (var_im / 2.0).sqrt();

    // Fine moment integration over +/- 6.5 sigma per axis.
    let n = 81;
    let span = 6.5;
    let step_re = 2.0 * span * sig_re / (n - 1) as f64;
    let step_im = 2.0 * span * sig_im / (n - 1) as f64;
    let mut total = 0.0;
    let mut mean = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let re = center.re - span * sig_re + i as f64 * step_re;
        for j in 0..n {
            let x = Complex64::new(re, center.im - span * sig_im + j as f64 * step_im);
            let w = (logf(x) - best.0).exp();
            total += w;
            mean += x * w;
        }
    }
    mean /= total;
    let mut var = 0.0;
    for i in 0..n {
        let re = center.re - span * sig_re + i as f64 * step_re;
        for j in 0..n {
            let x = Complex64::new(re, center.im - span * sig_im + j as f64 * step_im);
            var += (logf(x) - best.0).exp() * (x - mean).norm_sqr();
        }
    }
    (mean, var / total)
}

// ---------------------------------------------------------------------------
// Criterion 1: hybrid-rule messages against the grid oracle
// ---------------------------------------------------------------------------

fn hybrid_rule_check(cases: usize, budget_s: f64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x0C0FFEE1);
    let tol = 1e-4;
    let mut worst = 0.0f64;
    for case in 0..cases {
        // Draw a channel belief, a symbol belief, and an incoming z
        // message in ranges that keep the peak inside the coarse box.
        let b_mag = uniform(&mut rng, 0.3, 3.0);
        let b_ang = uniform(&mut rng, 0.0, std::f64::consts::TAU);
        let b_mean = Complex64::new(b_mag * b_ang.cos(), b_mag * b_ang.sin());
        let b_var = log_uniform(&mut rng, 1e-3, 2.0);
        let z = GaussMsg::new(rand_complex(&mut rng, 2.0), log_uniform(&mut rng, 1e-2, 4.0));

        // Collapsed factor: CN(x b; z_mean, z_var); mean-field expectation
        // over the belief b gives the exponent
        // -( |z - x b_mean|^2 + |x|^2 b_var ) / z_var
        // (second-moment identity; the closed form is never consulted).
        let logf = move |x: Complex64| {
            -((z.mean - x * b_mean).norm_sqr() + x.norm_sqr() * b_var) / z.var
        };
        let (want_mean, want_var) = grid_moments(&logf);
        let scale = want_var.sqrt();

        // The two directions share the algebra with the roles swapped, so
        // alternate between them.
        let got = if case % 2 == 0 {
            msg_fz_to_x(z, GaussMsg::new(b_mean, b_var)).unwrap()
        } else {
            msg_fz_to_h(z, b_mean, b_var).unwrap()
        };
        let e_mean = rel_err_c(got.mean, want_mean, scale);
        let e_var = rel_err(got.var, want_var, scale * scale);
        worst = worst.max(e_mean).max(e_var);
        if e_mean > tol || e_var > tol {
            return CheckReport::finish(
                "hybrid-rule grid oracle",
                started,
                budget_s,
                Err(format!(
                    "case {case}: mean err {e_mean:.2e}, var err {e_var:.2e} > {tol:.0e}"
                )),
            );
        }
    }
    CheckReport::finish(
        "hybrid-rule grid oracle",
        started,
        budget_s,
        Ok(format!("{cases} cases, worst rel err {worst:.2e} <= 1e-4")),
    )
}

/// Acceptance criterion 1: 1e4 random inputs per message direction match
/// the grid-evaluated rule within 1e-4 relative error in under 2 minutes.
pub fn criterion1_hybrid_rule() -> CheckReport {
    hybrid_rule_check(20_000, 120.0)
}

// ---------------------------------------------------------------------------
// Criterion 2: product-moment formula against Monte-Carlo sampling
// ---------------------------------------------------------------------------

fn belief_z_check(sets: usize, samples: usize, budget_s: f64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x0BE11EF2);
    let mut worst_sigma = 0.0f64;
    for set in 0..sets {
        let xm = rand_complex(&mut rng, 1.5);
        let hm = rand_complex(&mut rng, 1.5);
        let xv = log_uniform(&mut rng, 1e-2, 2.0);
        let hv = log_uniform(&mut rng, 1e-2, 2.0);
        let zb = receiver::belief_z(xm, xv, hm, hv);

        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = 0.0;
        let mut quad = 0.0;
        let (sx, sh) = (xv.sqrt(), hv.sqrt());
        for _ in 0..samples {
            let z = (xm + complex_gaussian(&mut rng) * sx) * (hm + complex_gaussian(&mut rng) * sh);
            sum += z;
            let p = z.norm_sqr();
            pow += p;
            quad += p * p;
        }
        let n = samples as f64;
        let mean = sum / n;
        let var = pow / n - mean.norm_sqr();
        // Standard errors estimated from the sample itself.
        let se_mean = (var / n).sqrt();
        // var is (mean of |z|^2) - |mean z|^2; its variance is dominated by
        // the fourth moment of |z - mean|.
        let m4 = quad / n - (pow / n) * (pow / n);
        let se_var = (m4 / n).sqrt();

        let dev_mean = (zb.mean - mean).norm() / se_mean;
        let dev_var = (zb.var - var).abs() / se_var;
        worst_sigma = worst_sigma.max(dev_mean).max(dev_var);
        if dev_mean > 3.0 || dev_var > 3.0 {
            return CheckReport::finish(
                "product-moment Monte-Carlo oracle",
                started,
                budget_s,
                Err(format!(
                    "set {set}: mean {dev_mean:.2} se, var {dev_var:.2} se > 3 se"
                )),
            );
        }
    }
    CheckReport::finish(
        "product-moment Monte-Carlo oracle",
        started,
        budget_s,
        Ok(format!(
            "{sets} parameter sets x {samples} samples, worst deviation {worst_sigma:.2} se <= 3 se"
        )),
    )
}

/// Acceptance criterion 2: Eq.-style product variance matches 1e6-sample
/// moments within 3 standard errors on 100 parameter sets in under 1 min.
pub fn criterion2_belief_z() -> CheckReport {
    belief_z_check(100, 1_000_000, 60.0)
}

// ---------------------------------------------------------------------------
// Criterion 3: Gaussian algebra round-trip and projection self-consistency
// ---------------------------------------------------------------------------

fn gmsg_check(cases: usize, budget_s: f64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x6A055313);
    let mut worst_rt = 0.0f64;
    for case in 0..cases {
        let a = GaussMsg::new(rand_complex(&mut rng, 5.0), log_uniform(&mut rng, 1e-2, 1e2));
        let mut b = GaussMsg::new(rand_complex(&mut rng, 5.0), log_uniform(&mut rng, 1e-2, 1e2));
        if (a.var - b.var).abs() < 1e-3 * a.var.max(b.var) {
            b.var *= 2.0; // keep the divide well-posed
        }
        let (q, clamped) = gmsg::divide_flagged(gmsg::product(a, b), b);
        let e = rel_err_c(q.mean, a.mean, a.var.sqrt()).max(rel_err(q.var, a.var, 0.0));
        worst_rt = worst_rt.max(e);
        if clamped || e > 1e-10 {
            return CheckReport::finish(
                "gaussian algebra properties",
                started,
                budget_s,
                Err(format!("case {case}: round-trip err {e:.2e} > 1e-10")),
            );
        }
        let p = gmsg::product(a, b);
        if p.var > a.var.min(b.var) * (1.0 + 1e-12) {
            return CheckReport::finish(
                "gaussian algebra properties",
                started,
                budget_s,
                Err(format!("case {case}: product increased variance")),
            );
        }
    }

    // Projection self-consistency: sample a Gaussian's pdf on a +/-6 sigma
    // grid and require the projection to reproduce it.
    let mut worst_proj = 0.0f64;
    for case in 0..cases {
        let g = GaussMsg::new(rand_complex(&mut rng, 3.0), log_uniform(&mut rng, 1e-2, 1e2));
        let sigma = g.var.sqrt();
        let n = 61;
        let step = 12.0 * sigma / (n - 1) as f64;
        let mut pts = Vec::with_capacity(n * n);
        for i in 0..n {
            let re = g.mean.re - 6.0 * sigma + i as f64 * step;
            for j in 0..n {
                let x = Complex64::new(re, g.mean.im - 6.0 * sigma + j as f64 * step);
                pts.push((x, (-(x - g.mean).norm_sqr() / g.var).exp()));
            }
        }
        let back = gmsg::project_gaussian(&pts).unwrap();
        let e = rel_err_c(back.mean, g.mean, sigma).max(rel_err(back.var, g.var, 0.0));
        worst_proj = worst_proj.max(e);
        if e > 1e-4 {
            return CheckReport::finish(
                "gaussian algebra properties",
                started,
                budget_s,
                Err(format!("case {case}: projection err {e:.2e} > 1e-4")),
            );
        }
    }
    CheckReport::finish(
        "gaussian algebra properties",
        started,
        budget_s,
        Ok(format!(
            "{cases} round-trips (worst {worst_rt:.2e} <= 1e-10), {cases} projections (worst {worst_proj:.2e} <= 1e-4)"
        )),
    )
}

/// Acceptance criterion 3: 1e5 randomized product/divide round-trips and
/// projection self-consistency cases in under 30 s.
pub fn criterion3_gmsg() -> CheckReport {
    gmsg_check(100_000, 30.0)
}

// ---------------------------------------------------------------------------
// Criterion 4: channel estimator against the dense LMMSE oracle
// ---------------------------------------------------------------------------

/// Dense LMMSE over the subcarrier-domain prior covariance
/// `C = F F^H / L`, solved with nalgebra's LU. Returns posterior means and
/// variances for every subcarrier.
fn dense_lmmse(extr: &[GaussMsg], k_sub: usize, l_taps: usize) -> (Vec<Complex64>, Vec<f64>) {
    use std::f64::consts::TAU;
    let cov = |i: usize, j: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..l_taps {
            let ang = -TAU * (((i + k_sub - j) * l) % k_sub) as f64 / k_sub as f64;
            acc += Complex64::new(ang.cos(), ang.sin());
        }
        acc / l_taps as f64
    };
    let observed: Vec<usize> = (0..k_sub).filter(|&k| !extr[k].is_vacuous()).collect();
    let s = observed.len();
    assert!(s > 0);
    let a = DMatrix::<Complex64>::from_fn(s, s, |r, c| {
        let mut v = cov(observed[r], observed[c]);
        if r == c {
            v += Complex64::new(extr[observed[r]].var, 0.0);
        }
        v
    });
    let obs = DMatrix::<Complex64>::from_fn(s, 1, |r, _| extr[observed[r]].mean);
    let cross = DMatrix::<Complex64>::from_fn(s, k_sub, |r, c| cov(observed[r], c));
    let lu = a.lu();
    let alpha = lu.solve(&obs).expect("posterior system is nonsingular");
    let x = lu.solve(&cross).expect("posterior system is nonsingular");
    let mut means = Vec::with_capacity(k_sub);
    let mut vars = Vec::with_capacity(k_sub);
    for k in 0..k_sub {
        let mut mu = Complex64::new(0.0, 0.0);
        let mut red = Complex64::new(0.0, 0.0);
        for (r, &ko) in observed.iter().enumerate() {
            mu += cov(k, ko) * alpha[(r, 0)];
            red += cov(k, ko) * x[(r, k)];
        }
        means.push(mu);
        vars.push((cov(k, k) - red).re.max(0.0));
    }
    (means, vars)
}

fn chanest_oracle_check(configs: usize) -> Result<String, String> {
    let mut rng = ChaCha12Rng::seed_from_u64(0xC4A2E513);
    let mut worst = 0.0f64;
    for case in 0..configs {
        let k_sub = 48;
        let l_taps = 1 + (rng.next_u64() % 6) as usize;
        let dft = DftTable::new(k_sub, l_taps);
        // Random observation pattern: between l_taps and all subcarriers.
        let observed = l_taps + (rng.next_u64() as usize % (k_sub - l_taps + 1));
        let mut extr = vec![GaussMsg::vacuous(); k_sub];
        let mut picked = 0;
        while picked < observed {
            let k = (rng.next_u64() as usize) % k_sub;
            if extr[k].is_vacuous() {
                extr[k] = GaussMsg::new(
                    rand_complex(&mut rng, 2.0),
                    log_uniform(&mut rng, 1e-2, 1e2),
                );
                picked += 1;
            }
        }
        let post = receiver::tap_posterior(&extr, &dft).map_err(|e| format!("case {case}: {e}"))?;
        let (means, vars) = dense_lmmse(&extr, k_sub, l_taps);
        for k in 0..k_sub {
            let e = rel_err_c(post[k].mean, means[k], vars[k].sqrt())
                .max(rel_err(post[k].var, vars[k], 0.0));
            worst = worst.max(e);
            if e > 1e-9 {
                return Err(format!(
                    "case {case} subcarrier {k}: err {e:.2e} > 1e-9 (L = {l_taps}, obs = {observed})"
                ));
            }
        }
    }
    Ok(format!("{configs} configs vs dense LMMSE, worst rel err {worst:.2e} <= 1e-9"))
}

fn pilot_nmse_check(frames: usize) -> Result<String, String> {
    // Pilot-only layout: every subcarrier is a pilot of the single user.
    let (m_ant, k_sub, l_taps) = (4, 64, 8);
    let sys = SystemConfig::new(
        m_ant,
        1,
        k_sub,
        k_sub,
        l_taps,
        Constellation::qpsk(),
        CodeConfig::default_k7(),
        15,
        None,
        11,
    )
    .map_err(|e| e.to_string())?;
    let lambda = 10.0; // Eb/N0 = 10 dB at QPSK rate 1/2
    let mut rng = ChaCha12Rng::seed_from_u64(0x9110712);
    let pilot = pilot_symbol();
    let (mut err_rx, mut err_genie, mut pow) = (0.0, 0.0, 0.0);
    for _ in 0..frames {
        let frame = build_frame(&sys, &mut rng);
        let ch = gen_channel(&mut rng, m_ant, 1, k_sub, l_taps);
        let y = transmit(&frame.symbols, &ch, &sys.pattern, lambda, &mut rng)
            .map_err(|e| e.to_string())?;
        let out = run_receiver(&y, &sys, GenieAids::none(), None).map_err(|e| e.to_string())?;
        for m in 0..m_ant {
            // Genie bound: dense LMMSE on the pilot observations with the
            // true noise precision.
            let extr: Vec<GaussMsg> = (0..k_sub)
                .map(|k| GaussMsg::new(y.y(m, k) / pilot, 1.0 / lambda))
                .collect();
            let (means, _) = dense_lmmse(&extr, k_sub, l_taps);
            for (k, &genie_mean) in means.iter().enumerate() {
                let h = ch.h(m, 0, k);
                err_rx += (out.h_belief.get(m, 0, k).mean - h).norm_sqr();
                err_genie += (genie_mean - h).norm_sqr();
                pow += h.norm_sqr();
            }
        }
    }
    let rx_db = 10.0 * (err_rx / pow).log10();
    let genie_db = 10.0 * (err_genie / pow).log10();
    let gap = (rx_db - genie_db).abs();
    if gap <= 0.5 {
        Ok(format!(
            "pilot-only NMSE {rx_db:.2} dB vs genie LMMSE {genie_db:.2} dB over {frames} frames (gap {gap:.2} <= 0.5 dB)"
        ))
    } else {
        Err(format!(
            "pilot-only NMSE {rx_db:.2} dB vs genie {genie_db:.2} dB: gap {gap:.2} dB > 0.5 dB"
        ))
    }
}

fn chanest_check(configs: usize, frames: usize, budget_s: f64) -> CheckReport {
    let started = Instant::now();
    let result = chanest_oracle_check(configs)
        .and_then(|a| pilot_nmse_check(frames).map(|b| format!("{a}; {b}")));
    CheckReport::finish("channel estimator vs dense LMMSE", started, budget_s, result)
}

/// Acceptance criterion 4: tap posterior equals the dense LMMSE oracle
/// within 1e-9 on 100 random extrinsic configurations, and pilot-only
/// NMSE sits within 0.5 dB of the genie bound at 10 dB over 500 frames,
/// inside 5 minutes.
pub fn criterion4_chanest() -> CheckReport {
    chanest_check(100, 500, 300.0)
}

// ---------------------------------------------------------------------------
// Criterion 5: noise-precision estimate with genie beliefs
// ---------------------------------------------------------------------------

fn lambda_check(trials: usize, budget_s: f64) -> CheckReport {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x1A3BDA5);
    let lambda_true = 5.0;
    let (m_ant, k_sub) = (4, 1024); // M K = 4096
    let c4 = Constellation::qpsk();
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let pattern = mprx_core::phy::make_pilot_pattern(1, k_sub, k_sub).unwrap();
        let ch = gen_channel(&mut rng, m_ant, 1, k_sub, 1);
        let x: Vec<Vec<Complex64>> = vec![(0..k_sub)
            .map(|_| c4.point((rng.next_u64() % 4) as usize))
            .collect()];
        let y = transmit(&x, &ch, &pattern, lambda_true, &mut rng).unwrap();
        // Genie beliefs: exact z with zero variance.
        let mut zb = Vec::with_capacity(m_ant * k_sub);
        for m in 0..m_ant {
            for (k, &sym) in x[0].iter().enumerate() {
                zb.push(GaussMsg::point(ch.h(m, 0, k) * sym));
            }
        }
        let (lambda_hat, clamped) = receiver::noise_precision_update(&y, &zb, 1);
        let err = (lambda_hat - lambda_true).abs() / lambda_true;
        worst = worst.max(err);
        if clamped || err > 0.10 {
            return CheckReport::finish(
                "noise precision with genie beliefs",
                started,
                budget_s,
                Err(format!("trial {trial}: rel err {err:.3} > 0.10")),
            );
        }
    }
    CheckReport::finish(
        "noise precision with genie beliefs",
        started,
        budget_s,
        Ok(format!(
            "{trials} trials at M K = 4096, worst rel err {worst:.3} <= 0.10"
        )),
    )
}

/// Acceptance criterion 5: genie-belief lambda estimate within 10% of the
/// true value at M K = 4096, in under 10 s.
pub fn criterion5_lambda() -> CheckReport {
    lambda_check(20, 10.0)
}

// ---------------------------------------------------------------------------
// Criterion 6: BCJR against exhaustive codeword enumeration
// ---------------------------------------------------------------------------

fn bcjr_check(info_len: usize, budget_s: f64) -> CheckReport {
    let started = Instant::now();
    let code = CodeConfig::default_k7();
    let coded_len = code.coded_len(info_len);
    let mut rng = ChaCha12Rng::seed_from_u64(0xBC12BC12);
    let llrs: Vec<f64> = (0..coded_len).map(|_| uniform(&mut rng, -5.0, 5.0)).collect();

    // Enumerate all codewords; the termination tail is a function of the
    // info word, so the codebook has exactly 2^info_len entries.
    let mut prob0 = vec![0.0f64; coded_len];
    let mut total = 0.0f64;
    let mut bits = vec![0u8; info_len];
    for word in 0u64..(1 << info_len) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = ((word >> i) & 1) as u8;
        }
        let coded = code.encode(&bits);
        let mut logw = 0.0;
        for (j, &c) in coded.iter().enumerate() {
            logw += (1.0 - 2.0 * c as f64) * llrs[j] * 0.5;
        }
        let w = logw.exp();
        total += w;
        for (j, &c) in coded.iter().enumerate() {
            if c == 0 {
                prob0[j] += w;
            }
        }
    }
    for p in &mut prob0 {
        *p /= total;
    }

    let (ext, _) = decode_siso(&code, &llrs, LlrCombine::Exact);
    let mut worst = 0.0f64;
    for j in 0..coded_len {
        let post = llrs[j] + ext[j];
        let p = 1.0 / (1.0 + (-post).exp());
        let err = (p - prob0[j]).abs();
        worst = worst.max(err);
        if err > 1e-8 {
            return CheckReport::finish(
                "BCJR vs exhaustive enumeration",
                started,
                budget_s,
                Err(format!("coded bit {j}: |dP| = {err:.2e} > 1e-8")),
            );
        }
    }
    CheckReport::finish(
        "BCJR vs exhaustive enumeration",
        started,
        budget_s,
        Ok(format!(
            "{info_len}-bit block, {} codewords, worst |dP| {worst:.2e} <= 1e-8",
            1u64 << info_len
        )),
    )
}

/// Acceptance criterion 6: 20-information-bit BCJR posteriors equal the
/// brute-force codebook marginals within 1e-8, in under 1 min.
pub fn criterion6_bcjr() -> CheckReport {
    bcjr_check(20, 60.0)
}

// ---------------------------------------------------------------------------
// Criterion 7: end-to-end BER ordering and the 1e-3 crossing gap
// ---------------------------------------------------------------------------

/// Eb/N0 where a BER curve crosses `target`, by log-linear interpolation;
/// zero BERs are floored at half an error over the point's bit count.
pub fn crossing_db(points: &[(f64, f64, u64)], target: f64) -> Option<f64> {
    let floored: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, ber, bits)| (x, ber.max(0.5 / bits as f64)))
        .collect();
    for w in floored.windows(2) {
        let (x0, b0) = w[0];
        let (x1, b1) = w[1];
        if b0 > target && b1 <= target {
            let t = (target.log10() - b0.log10()) / (b1.log10() - b0.log10());
            return Some(x0 + t * (x1 - x0));
        }
    }
    None
}

/// One receiver's measured curve: (Eb/N0 dB, BER, bits per point).
type BerCurve = Vec<(f64, f64, u64)>;

fn measure_curves(cfg: &SimConfig, workers: usize) -> Result<[BerCurve; 3], String> {
    let records = run_sweep_collect(cfg, workers).map_err(|e| e.to_string())?;
    let curve = |kind: ReceiverKind| -> BerCurve {
        cfg.ebn0_grid
            .iter()
            .map(|&snr| {
                let (mut errs, mut bits) = (0u64, 0u64);
                for r in records.iter().filter(|r| r.receiver == kind && r.ebn0_db == snr) {
                    errs += r.bit_errors;
                    bits += r.info_bits;
                }
                (snr, errs as f64 / bits as f64, bits)
            })
            .collect()
    };
    Ok([
        curve(ReceiverKind::Mfb),
        curve(ReceiverKind::Proposed),
        curve(ReceiverKind::DirectMf),
    ])
}

fn curve_table(mfb: &BerCurve, prop: &BerCurve, mf: &BerCurve) -> String {
    let mut out = String::new();
    for i in 0..mfb.len() {
        out.push_str(&format!(
            "\n    {:>5.1} dB: mfb {:.2e}  proposed {:.2e}  direct_mf {:.2e}",
            mfb[i].0, mfb[i].1, prop[i].1, mf[i].1
        ));
    }
    out
}

/// The ordering clause: MFB <= proposed <= direct-MF at every point where
/// direct-MF is at or below 1e-2.
fn check_ordering_clause(mfb: &BerCurve, prop: &BerCurve, mf: &BerCurve) -> Result<(), String> {
    for i in 0..mfb.len() {
        if mf[i].1 <= 1e-2 && !(mfb[i].1 <= prop[i].1 && prop[i].1 <= mf[i].1) {
            return Err(format!(
                "ordering violated at {} dB: mfb {:.3e}, proposed {:.3e}, direct_mf {:.3e}",
                mfb[i].0, mfb[i].1, prop[i].1, mf[i].1
            ));
        }
    }
    Ok(())
}

/// The crossing-gap clause: direct-MF's 1e-3 crossing minus the proposed
/// receiver's, both by interpolation on the given curves.
fn gap_at_1e3(prop: &BerCurve, mf: &BerCurve) -> Result<(f64, f64, f64), String> {
    let mf_cross = crossing_db(mf, 1e-3)
        .ok_or_else(|| "direct_mf never crosses BER 1e-3 inside the sweep".to_string())?;
    let prop_cross = match crossing_db(prop, 1e-3) {
        Some(c) => c,
        // Already below 1e-3 at the left edge: the edge bounds the
        // crossing from above, giving a conservative gain.
        None if prop[0].1 < 1e-3 => prop[0].0,
        None => return Err("proposed never crosses BER 1e-3 inside the sweep".to_string()),
    };
    Ok((prop_cross, mf_cross, mf_cross - prop_cross))
}

fn ordering_check(
    name: &'static str,
    cfg: &SimConfig,
    min_bits: u64,
    budget_s: f64,
    diagnose_waterfall: bool,
) -> CheckReport {
    let started = Instant::now();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let [mfb, prop, mf] = match measure_curves(cfg, workers) {
        Ok(c) => c,
        Err(e) => return CheckReport::finish(name, started, budget_s, Err(e)),
    };
    let curve = curve_table(&mfb, &prop, &mf);

    let result = (|| {
        let bits = prop[0].2;
        if bits < min_bits {
            return Err(format!("only {bits} bits per point, need >= {min_bits}{curve}"));
        }
        check_ordering_clause(&mfb, &prop, &mf).map_err(|e| format!("{e}{curve}"))?;
        let (prop_cross, mf_cross, gain) = gap_at_1e3(&prop, &mf).map_err(|e| {
            // The stated window can miss the waterfall entirely; measure
            // where the curves actually fall so the failure is
            // quantitative.
            if diagnose_waterfall {
                let mut diag_cfg = cfg.clone();
                diag_cfg.ebn0_grid = vec![-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0];
                diag_cfg.frames_per_point = 230;
                match measure_curves(&diag_cfg, workers) {
                    Ok([dmfb, dprop, dmf]) => {
                        let dcurve = curve_table(&dmfb, &dprop, &dmf);
                        match gap_at_1e3(&dprop, &dmf) {
                            Ok((p, m, g)) => format!(
                                "{e}{curve}\n  waterfall diagnostic (same config, shifted grid): \
                                 proposed crosses 1e-3 at {p:.2} dB, direct_mf at {m:.2} dB, \
                                 gain {g:.2} dB{dcurve}"
                            ),
                            Err(e2) => format!("{e}{curve}\n  waterfall diagnostic failed: {e2}{dcurve}"),
                        }
                    }
                    Err(e2) => format!("{e}{curve}\n  waterfall diagnostic failed: {e2}"),
                }
            } else {
                format!("{e}{curve}")
            }
        })?;
        if gain >= 0.5 {
            Ok(format!(
                "ordering holds; 1e-3 crossings: proposed {prop_cross:.2} dB, direct_mf \
                 {mf_cross:.2} dB, gain {gain:.2} dB >= 0.5 dB; {bits} bits/point{curve}"
            ))
        } else {
            Err(format!(
                "gain at BER 1e-3 is {gain:.2} dB < 0.5 dB (proposed {prop_cross:.2}, direct_mf \
                 {mf_cross:.2}){curve}"
            ))
        }
    })();
    CheckReport::finish(name, started, budget_s, result)
}

/// Acceptance criterion 7, exactly as stated: the default desk-scale
/// configuration over a 0-16 dB sweep with at least 1e5 information bits
/// per point must keep BER(MFB) <= BER(proposed) <= BER(direct-MF)
/// wherever BER(direct-MF) <= 1e-2 and show a >= 0.5 dB advantage at BER
/// 1e-3 by interpolation, inside an hour.
///
/// The default configuration's waterfalls all sit below 0 dB (four
/// receive antennas serving two users), so the crossing clause cannot be
/// met inside the stated window; the report carries a shifted-grid
/// diagnostic quantifying where the curves actually cross.
pub fn criterion7_ordering() -> CheckReport {
    // 230 frames x 436 info bits = 100_280 bits per point.
    let cfg = SimConfig {
        ebn0_grid: (0..=8).map(|i| 2.0 * i as f64).collect(),
        frames_per_point: 230,
        master_seed: 7,
        ..SimConfig::default()
    };
    ordering_check(
        "ber ordering, default config over 0-16 dB",
        &cfg,
        100_000,
        3600.0,
        true,
    )
}

/// Companion ordering run under full load (four users on four antennas,
/// everything else per the defaults): here the interference-cancellation
/// rule separates the receivers, and the ordering plus the >= 0.5 dB gap
/// at BER 1e-3 are both measurable inside the sweep.
pub fn loaded_ordering() -> CheckReport {
    // 744 info bits per frame across the four users.
    let cfg = SimConfig {
        n_users: 4,
        ebn0_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
        frames_per_point: 140,
        master_seed: 7,
        ..SimConfig::default()
    };
    ordering_check(
        "ber ordering, loaded config (N = 4)",
        &cfg,
        100_000,
        3600.0,
        false,
    )
}

// ---------------------------------------------------------------------------
// Criterion 8: linear complexity scaling
// ---------------------------------------------------------------------------

/// Median per-iteration wall time for one fresh frame of the given
/// geometry (L = 16 taps, pilots and code per the defaults).
fn iteration_seconds_once(m_antennas: usize, n_users: usize, k_subcarriers: usize, seed: u64) -> f64 {
    let iterations = 6;
    let sys = SystemConfig::new(
        m_antennas,
        n_users,
        k_subcarriers,
        16,
        16,
        Constellation::qpsk(),
        CodeConfig::default_k7(),
        iterations,
        None,
        seed,
    )
    .expect("scaling configs are valid");
    let lambda = 10.0;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let frame = build_frame(&sys, &mut rng);
    let ch = gen_channel(&mut rng, m_antennas, n_users, k_subcarriers, 16);
    let y = transmit(&frame.symbols, &ch, &sys.pattern, lambda, &mut rng).unwrap();
    let ws = RxWorkspace::new(&sys);
    let genie = GenieAids::none();
    let mut state = ReceiverState::new(&sys, &ws, &y, &genie);
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let t = Instant::now();
        state.iterate(&y, &sys, &ws, &genie).unwrap();
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

fn scaling_check(budget_s: f64) -> CheckReport {
    let started = Instant::now();
    // Base geometry where the O(M N K) message and channel-prior work
    // dominates; the four configs are interleaved across rounds and each
    // keeps its fastest round, so background load cancels out of the
    // ratios.
    let configs = [(24usize, 2usize, 256usize), (48, 2, 256), (24, 4, 256), (24, 2, 512)];
    let mut mins = [f64::INFINITY; 4];
    for round in 0..6u64 {
        for (i, &(m, n, k)) in configs.iter().enumerate() {
            let t = iteration_seconds_once(m, n, k, 1000 + round);
            mins[i] = mins[i].min(t);
        }
    }
    let ratios = [mins[1] / mins[0], mins[2] / mins[0], mins[3] / mins[0]];
    let detail = format!(
        "base (M=24, N=2, K=256, L=16) {:.2} ms/iter; doubling M x{:.2}, N x{:.2}, K x{:.2} (bounds [1.6, 2.6])",
        mins[0] * 1e3,
        ratios[0],
        ratios[1],
        ratios[2]
    );
    let ok = ratios.iter().all(|r| (1.6..=2.6).contains(r));
    CheckReport::finish(
        "complexity scaling",
        started,
        budget_s,
        if ok { Ok(detail) } else { Err(detail) },
    )
}

/// Acceptance criterion 8: doubling M, N, or K independently scales the
/// per-iteration wall time by a factor in [1.6, 2.6], in under 10 min.
pub fn criterion8_scaling() -> CheckReport {
    scaling_check(600.0)
}

// ---------------------------------------------------------------------------
// Criterion 9: determinism across worker counts
// ---------------------------------------------------------------------------

fn determinism_check(budget_s: f64) -> CheckReport {
    let started = Instant::now();
    let cfg = SimConfig {
        ebn0_grid: vec![4.0, 8.0],
        frames_per_point: 6,
        master_seed: 99,
        ..SimConfig::default()
    };

    let unique = format!(
        "mprx-determinism-{}-{}",
        std::process::id(),
        started.elapsed().as_nanos()
    );
    let base = std::env::temp_dir().join(unique);
    let run = |workers: usize, sub: &str| -> Result<String, String> {
        let dir = base.join(sub);
        let out = run_sweep(&cfg, workers, &dir).map_err(|e| e.to_string())?;
        std::fs::read_to_string(&out.summary_path).map_err(|e| e.to_string())
    };
    let result = (|| {
        let one = run(1, "w1")?;
        let eight = run(8, "w8")?;
        if one == eight {
            Ok(format!(
                "summary CSV identical for 1 and 8 workers ({} bytes)",
                one.len()
            ))
        } else {
            Err("summary CSV differs between 1 and 8 workers".to_string())
        }
    })();
    let _ = std::fs::remove_dir_all(&base);
    CheckReport::finish("worker-count determinism", started, budget_s, result)
}

/// Acceptance criterion 9: identical summary CSV for 1 and 8 workers with
/// the same master seed, in under 5 min.
pub fn criterion9_determinism() -> CheckReport {
    determinism_check(300.0)
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// The full acceptance-scale suites, in criterion order, plus the
/// loaded-configuration ordering companion.
pub fn run_full() -> Vec<CheckReport> {
    vec![
        criterion1_hybrid_rule(),
        criterion2_belief_z(),
        criterion3_gmsg(),
        criterion4_chanest(),
        criterion5_lambda(),
        criterion6_bcjr(),
        criterion7_ordering(),
        criterion8_scaling(),
        criterion9_determinism(),
        loaded_ordering(),
    ]
}

/// Reduced-size oracle and property suites for `mprx check`; same
/// tolerances, smaller case counts, seconds instead of minutes.
pub fn run_quick() -> Vec<CheckReport> {
    vec![
        hybrid_rule_check(600, 120.0),
        belief_z_check(10, 200_000, 60.0),
        gmsg_check(3_000, 30.0),
        chanest_check(20, 50, 300.0),
        lambda_check(5, 10.0),
        bcjr_check(14, 60.0),
    ]
}
