//! Multiuser MIMO-OFDM world model in the frequency domain.
//!
//! The model is per-subcarrier: user symbols are weighted by the
//! frequency-domain channel, summed across users, and observed in AWGN at
//! each receive antenna. Channels are drawn from a uniform power-delay
//! profile with `l_taps` time-domain taps so that `E|h|^2 = 1`; the
//! frequency response is the tap DFT. Pilot subcarriers are uniformly
//! spaced, disjoint across users, and silent for every non-owner.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand_core::RngCore;

use crate::rng::complex_gaussian;

/// The known symbol every pilot subcarrier carries: the unit-energy QPSK
/// point `(1+i)/sqrt(2)`.
pub fn pilot_symbol() -> Complex64 {
    let a = 1.0 / 2.0f64.sqrt();
    Complex64::new(a, a)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhyError {
    /// Pilot layout parameters violate the divisibility or budget rules.
    InvalidPilotConfig {
        n_users: usize,
        k_subcarriers: usize,
        kp: usize,
    },
    /// A non-owner transmitted a nonzero symbol on a pilot subcarrier.
    PilotViolation { user: usize, subcarrier: usize },
}

impl fmt::Display for PhyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhyError::InvalidPilotConfig {
                n_users,
                k_subcarriers,
                kp,
            } => write!(
                f,
                "invalid pilot config: need kp >= 1 and n_users * kp ({} * {}) to divide k ({})",
                n_users, kp, k_subcarriers
            ),
            PhyError::PilotViolation { user, subcarrier } => write!(
                f,
                "user {} transmits on subcarrier {} owned by another user's pilot set",
                user, subcarrier
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PhyError {}

/// Disjoint per-user pilot subcarrier sets, uniformly spaced modulo K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotPattern {
    sets: Vec<Vec<usize>>,
    owner: Vec<Option<usize>>,
    kp: usize,
}

impl PilotPattern {
    /// Pilot sets per user, in user order.
    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn kp(&self) -> usize {
        self.kp
    }

    pub fn n_users(&self) -> usize {
        self.sets.len()
    }

    pub fn k_subcarriers(&self) -> usize {
        self.owner.len()
    }

    /// Which user's pilot set contains subcarrier `k`, if any.
    pub fn owner(&self, k: usize) -> Option<usize> {
        self.owner[k]
    }

    pub fn is_pilot_of(&self, user: usize, k: usize) -> bool {
        self.owner[k] == Some(user)
    }

    /// Subcarriers carrying no pilot from any user, ascending.
    pub fn data_subcarriers(&self) -> Vec<usize> {
        (0..self.owner.len()).filter(|&k| self.owner[k].is_none()).collect()
    }
}

/// Build the staggered uniform pilot layout: user `n` gets
/// `{ n * K/(N*Kp) + j * K/Kp : j = 0..Kp-1 }`, so spacings are `K/Kp`
/// within a user and the user offsets keep the sets disjoint.
pub fn make_pilot_pattern(
    n_users: usize,
    k_subcarriers: usize,
    kp: usize,
) -> Result<PilotPattern, PhyError> {
    let invalid = PhyError::InvalidPilotConfig {
        n_users,
        k_subcarriers,
        kp,
    };
    if n_users == 0 || kp == 0 || n_users * kp > k_subcarriers {
        return Err(invalid);
    }
    if !k_subcarriers.is_multiple_of(n_users * kp) {
        return Err(invalid);
    }
    let offset_step = k_subcarriers / (n_users * kp);
    let step = k_subcarriers / kp;
    let mut sets = Vec::with_capacity(n_users);
    let mut owner = vec![None; k_subcarriers];
    for n in 0..n_users {
        let set: Vec<usize> = (0..kp).map(|j| n * offset_step + j * step).collect();
        for &k in &set {
            debug_assert!(owner[k].is_none());
            owner[k] = Some(n);
        }
        sets.push(set);
    }
    Ok(PilotPattern { sets, owner, kp })
}

/// Time-domain taps per (antenna, user) and their K-point DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    m_antennas: usize,
    n_users: usize,
    k_subcarriers: usize,
    l_taps: usize,
    taps: Vec<Complex64>, // (m, n, l)
    freq: Vec<Complex64>, // (m, n, k)
}

impl ChannelRealization {
    /// Build a realization from explicit taps; the frequency response is
    /// filled in via `h[m][n][k] = sum_l taps[m][n][l] e^{-j 2 pi k l / K}`.
    pub fn from_taps(
        m_antennas: usize,
        n_users: usize,
        k_subcarriers: usize,
        l_taps: usize,
        taps: Vec<Complex64>,
    ) -> Self {
        assert_eq!(taps.len(), m_antennas * n_users * l_taps);
        let mut freq = vec![Complex64::new(0.0, 0.0); m_antennas * n_users * k_subcarriers];
        for m in 0..m_antennas {
            for n in 0..n_users {
                let tap_base = (m * n_users + n) * l_taps;
                let freq_base = (m * n_users + n) * k_subcarriers;
                for k in 0..k_subcarriers {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in 0..l_taps {
                        let angle = -TAU * ((k * l) % k_subcarriers) as f64 / k_subcarriers as f64;
                        acc += taps[tap_base + l] * Complex64::new(angle.cos(), angle.sin());
                    }
                    freq[freq_base + k] = acc;
                }
            }
        }
        Self {
            m_antennas,
            n_users,
            k_subcarriers,
            l_taps,
            taps,
            freq,
        }
    }

    pub fn m_antennas(&self) -> usize {
        self.m_antennas
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn k_subcarriers(&self) -> usize {
        self.k_subcarriers
    }

    pub fn l_taps(&self) -> usize {
        self.l_taps
    }

    pub fn tap(&self, m: usize, n: usize, l: usize) -> Complex64 {
        self.taps[(m * self.n_users + n) * self.l_taps + l]
    }

    /// Frequency-domain weight between user `n` and antenna `m` at
    /// subcarrier `k`.
    pub fn h(&self, m: usize, n: usize, k: usize) -> Complex64 {
        self.freq[(m * self.n_users + n) * self.k_subcarriers + k]
    }

    /// Total energy of the frequency response, `sum |h|^2` over (m, n, k).
    pub fn freq_energy(&self) -> f64 {
        self.freq.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Draw i.i.d. CN(0, 1/L) taps for every (antenna, user, tap) in that index
/// order and derive the frequency response.
pub fn gen_channel(
    rng: &mut impl RngCore,
    m_antennas: usize,
    n_users: usize,
    k_subcarriers: usize,
    l_taps: usize,
) -> ChannelRealization {
    assert!(l_taps >= 1 && l_taps <= k_subcarriers);
    let scale = 1.0 / (l_taps as f64).sqrt();
    let taps: Vec<Complex64> = (0..m_antennas * n_users * l_taps)
        .map(|_| complex_gaussian(rng) * scale)
        .collect();
    ChannelRealization::from_taps(m_antennas, n_users, k_subcarriers, l_taps, taps)
}

/// Received frequency-domain grid and the true noise precision that
/// produced it (receivers are free to ignore the latter).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    m_antennas: usize,
    k_subcarriers: usize,
    y: Vec<Complex64>, // (m, k)
    noise_precision: f64,
}

impl Observation {
    pub fn m_antennas(&self) -> usize {
        self.m_antennas
    }

    pub fn k_subcarriers(&self) -> usize {
        self.k_subcarriers
    }

    pub fn y(&self, m: usize, k: usize) -> Complex64 {
        self.y[m * self.k_subcarriers + k]
    }

    /// The true noise precision of the draw.
    pub fn noise_precision(&self) -> f64 {
        self.noise_precision
    }
}

/// Pass user symbol grids through the channel and add CN(0, 1/lambda)
/// noise per (antenna, subcarrier), antennas outer, subcarriers inner.
///
/// `x[n][k]` must be exactly zero whenever subcarrier `k` belongs to
/// another user's pilot set.
pub fn transmit(
    x: &[Vec<Complex64>],
    ch: &ChannelRealization,
    pattern: &PilotPattern,
    lambda: f64,
    rng: &mut impl RngCore,
) -> Result<Observation, PhyError> {
    let n_users = ch.n_users();
    let k_sub = ch.k_subcarriers();
    assert_eq!(x.len(), n_users);
    assert!(x.iter().all(|row| row.len() == k_sub));
    assert_eq!(pattern.k_subcarriers(), k_sub);
    assert!(lambda > 0.0);

    for (owner, set) in pattern.sets().iter().enumerate() {
        for &k in set {
            for (user, row) in x.iter().enumerate() {
                if user != owner && row[k] != Complex64::new(0.0, 0.0) {
                    return Err(PhyError::PilotViolation { user, subcarrier: k });
                }
            }
        }
    }

    let sigma = if lambda.is_infinite() { 0.0 } else { (1.0 / lambda).sqrt() };
    let mut y = Vec::with_capacity(ch.m_antennas() * k_sub);
    for m in 0..ch.m_antennas() {
        for k in 0..k_sub {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, row) in x.iter().enumerate() {
                acc += ch.h(m, n, k) * row[k];
            }
            y.push(acc + complex_gaussian(rng) * sigma);
        }
    }
    Ok(Observation {
        m_antennas: ch.m_antennas(),
        k_subcarriers: k_sub,
        y,
        noise_precision: lambda,
    })
}
