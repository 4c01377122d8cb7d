//! Tap-domain channel prior and the per-(antenna, user) update it drives.
//!
//! The frequency response of one (antenna, user) pair is `h = F t` with `F`
//! the first `L` columns of the K-point DFT matrix and `t ~ CN(0, I/L)`.
//! Incoming extrinsics `(mean_k, var_k)` are treated as independent
//! Gaussian observations of `h_k`; exact Gaussian inference then gives the
//! tap posterior through an L x L solve and per-subcarrier marginals, from
//! which the outgoing extrinsic divides away each subcarrier's own input.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::RxError;
use crate::gmsg::{self, GaussMsg};
use crate::linalg::{cholesky_in_place, chol_solve, quadratic_form_inv};

/// Diagonal loading on the tap-precision matrix.
const TAP_REGULARIZATION: f64 = 1e-10;

/// Floor on observation variances entering the solve, so exact (zero
/// variance) extrinsics stay usable.
const OBS_VAR_FLOOR: f64 = 1e-12;

/// Precomputed conjugated DFT rows: `row(k)[l] = e^{+j 2 pi k l / K}`.
#[derive(Debug, Clone)]
pub struct DftTable {
    k_subcarriers: usize,
    l_taps: usize,
    rows: Vec<Complex64>,
}

impl DftTable {
    pub fn new(k_subcarriers: usize, l_taps: usize) -> Self {
        let mut rows = Vec::with_capacity(k_subcarriers * l_taps);
        for k in 0..k_subcarriers {
            for l in 0..l_taps {
                let angle = TAU * ((k * l) % k_subcarriers) as f64 / k_subcarriers as f64;
                rows.push(Complex64::new(angle.cos(), angle.sin()));
            }
        }
        Self {
            k_subcarriers,
            l_taps,
            rows,
        }
    }

    pub fn l_taps(&self) -> usize {
        self.l_taps
    }

    pub fn k_subcarriers(&self) -> usize {
        self.k_subcarriers
    }

    #[inline]
    fn row(&self, k: usize) -> &[Complex64] {
        &self.rows[k * self.l_taps..(k + 1) * self.l_taps]
    }
}

/// Posterior marginal CN(mu_k, s2_k) of every `h_k` given the extrinsic
/// observations (vacuous entries are skipped) and the tap prior.
pub fn tap_posterior(extr: &[GaussMsg], dft: &DftTable) -> Result<Vec<GaussMsg>, RxError> {
    let l = dft.l_taps();
    assert_eq!(extr.len(), dft.k_subcarriers());

    // Lambda = L I + sum_k a_k a_k^H / var_k, b = sum_k a_k mean_k / var_k,
    // with a_k the conjugated DFT row.
    let mut lambda = vec![Complex64::new(0.0, 0.0); l * l];
    let mut b = vec![Complex64::new(0.0, 0.0); l];
    let prior_precision = l as f64;
    for i in 0..l {
        lambda[i * l + i] = Complex64::new(prior_precision + TAP_REGULARIZATION, 0.0);
    }
    for (k, msg) in extr.iter().enumerate() {
        if msg.is_vacuous() {
            continue;
        }
        let w = 1.0 / msg.var.max(OBS_VAR_FLOOR);
        let row = dft.row(k);
        for i in 0..l {
            let wi = row[i] * w;
            b[i] += wi * msg.mean;
            // Lower triangle suffices for the Cholesky.
            for j in 0..=i {
                lambda[i * l + j] += wi * row[j].conj();
            }
        }
    }

    cholesky_in_place(&mut lambda, l).map_err(|_| RxError::SingularTapSystem)?;
    let t_hat = chol_solve(&lambda, l, &b);

    let mut out = Vec::with_capacity(dft.k_subcarriers());
    for k in 0..dft.k_subcarriers() {
        let row = dft.row(k);
        // mu_k = a_k^H t_hat, s2_k = a_k^H Lambda^{-1} a_k.
        let mut mu = Complex64::new(0.0, 0.0);
        for (a, t) in row.iter().zip(&t_hat) {
            mu += a.conj() * t;
        }
        let s2 = quadratic_form_inv(&lambda, l, row);
        out.push(GaussMsg::new(mu, s2.max(0.0)));
    }
    Ok(out)
}

/// Full prior update for one (antenna, user) pair: posterior marginals and
/// the extrinsic messages back to each subcarrier, plus the number of
/// divisions the clamp policy caught.
pub fn channel_prior_update(
    extr_out: &[GaussMsg],
    dft: &DftTable,
) -> Result<(Vec<GaussMsg>, Vec<GaussMsg>, usize), RxError> {
    let posterior = tap_posterior(extr_out, dft)?;
    let mut clamps = 0usize;
    let extr_in = posterior
        .iter()
        .zip(extr_out)
        .map(|(&post, &own)| {
            if own.is_vacuous() {
                return post;
            }
            let (msg, clamped) = gmsg::divide_flagged(post, own);
            clamps += clamped as usize;
            msg
        })
        .collect();
    Ok((extr_in, posterior, clamps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// L = 1: the posterior tap is the precision-weighted average of all
    /// observations against the scalar prior, a closed form.
    #[test]
    fn single_tap_matches_scalar_lmmse() {
        let k = 8;
        let dft = DftTable::new(k, 1);
        let extr: Vec<GaussMsg> = (0..k)
            .map(|i| GaussMsg::new(c(0.3 + 0.1 * i as f64, -0.2), 0.5 + 0.25 * i as f64))
            .collect();
        let post = tap_posterior(&extr, &dft).unwrap();

        let mut w = 1.0; // prior precision L = 1
        let mut m = c(0.0, 0.0);
        for e in &extr {
            w += 1.0 / e.var;
            m += e.mean / e.var;
        }
        // Single tap: h_k = t for every k.
        for p in &post {
            assert!((p.mean - m / w).norm() < 1e-9 * (1.0 + (m / w).norm()));
            assert!((p.var - 1.0 / w).abs() < 1e-9 / w);
        }
    }

    /// Zero-variance extrinsics on at least L subcarriers pin the taps; the
    /// posterior mean must reproduce the exact frequency response.
    #[test]
    fn exact_observations_reproduce_truth() {
        use crate::phy::ChannelRealization;
        let (k, l) = (16, 4);
        let taps: Vec<Complex64> = (0..l)
            .map(|i| c(0.4 - 0.1 * i as f64, 0.2 * i as f64 - 0.3))
            .collect();
        let ch = ChannelRealization::from_taps(1, 1, k, l, taps);
        let dft = DftTable::new(k, l);
        let mut extr = vec![GaussMsg::vacuous(); k];
        for k_i in [0usize, 3, 7, 9, 12] {
            extr[k_i] = GaussMsg::new(ch.h(0, 0, k_i), 0.0);
        }
        let post = tap_posterior(&extr, &dft).unwrap();
        for k_i in 0..k {
            let truth = ch.h(0, 0, k_i);
            assert!(
                (post[k_i].mean - truth).norm() < 1e-9 * (1.0 + truth.norm()),
                "k = {k_i}"
            );
        }
    }

    #[test]
    fn extrinsic_division_removes_own_observation() {
        let (k, l) = (8, 2);
        let dft = DftTable::new(k, l);
        let extr: Vec<GaussMsg> = (0..k)
            .map(|i| GaussMsg::new(c(0.1 * i as f64, 0.05), 0.8))
            .collect();
        let (extr_in, posterior, clamps) = channel_prior_update(&extr, &dft).unwrap();
        assert_eq!(clamps, 0);
        for i in 0..k {
            // belief = extr_in * extr_out must reproduce the posterior.
            let prod = gmsg::product(extr_in[i], extr[i]);
            assert!((prod.mean - posterior[i].mean).norm() < 1e-9);
            assert!((prod.var - posterior[i].var).abs() < 1e-9);
        }
    }
}
