//! Shared description of one simulated link: dimensions, pilot layout,
//! modulation, code, and receiver iteration settings.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::gmsg::Constellation;
use crate::phy::{make_pilot_pattern, PhyError, PilotPattern};
use crate::rng::mix_seed;
use crate::txchain::{CodeConfig, Interleaver, LlrCombine, TxError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemError {
    Phy(PhyError),
    Tx(TxError),
    Invalid(String),
}

impl fmt::Display for SystemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemError::Phy(e) => e.fmt(f),
            SystemError::Tx(e) => e.fmt(f),
            SystemError::Invalid(msg) => f.write_str(msg),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SystemError {}

impl From<PhyError> for SystemError {
    fn from(e: PhyError) -> Self {
        SystemError::Phy(e)
    }
}

impl From<TxError> for SystemError {
    fn from(e: TxError) -> Self {
        SystemError::Tx(e)
    }
}

/// Everything the transmitter and every receiver agree on up front.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub m_antennas: usize,
    pub n_users: usize,
    pub k_subcarriers: usize,
    pub l_taps: usize,
    pub pattern: PilotPattern,
    pub constellation: Constellation,
    pub code: CodeConfig,
    pub iterations: usize,
    /// Convex damping weight on the new interference-cancellation
    /// extrinsics; `None` applies them undamped.
    pub damping: Option<f64>,
    pub demap_mode: LlrCombine,
    /// Base seed for the per-user interleaver permutations.
    pub interleaver_seed: u64,
}

impl SystemConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m_antennas: usize,
        n_users: usize,
        k_subcarriers: usize,
        kp_pilots: usize,
        l_taps: usize,
        constellation: Constellation,
        code: CodeConfig,
        iterations: usize,
        damping: Option<f64>,
        interleaver_seed: u64,
    ) -> Result<Self, SystemError> {
        if m_antennas == 0 {
            return Err(SystemError::Invalid("m_antennas must be >= 1".into()));
        }
        if iterations == 0 {
            return Err(SystemError::Invalid("iterations must be >= 1".into()));
        }
        if l_taps == 0 || l_taps > k_subcarriers {
            return Err(SystemError::Invalid(format!(
                "l_taps must be in 1..={k_subcarriers}"
            )));
        }
        if let Some(d) = damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(SystemError::Invalid("damping must lie in (0, 1]".into()));
            }
        }
        let pattern = make_pilot_pattern(n_users, k_subcarriers, kp_pilots)?;
        let cfg = Self {
            m_antennas,
            n_users,
            k_subcarriers,
            l_taps,
            pattern,
            constellation,
            code,
            iterations,
            damping,
            demap_mode: LlrCombine::Exact,
            interleaver_seed,
        };
        let coded = cfg.coded_bits_per_user();
        if coded > 0 && cfg.code.info_len(coded).is_none() {
            return Err(SystemError::Invalid(format!(
                "{coded} coded bits per user cannot carry a terminated block"
            )));
        }
        Ok(cfg)
    }

    /// Subcarriers free of any pilot, ascending; every user sends data on
    /// all of them.
    pub fn data_subcarriers(&self) -> Vec<usize> {
        self.pattern.data_subcarriers()
    }

    pub fn coded_bits_per_user(&self) -> usize {
        self.data_subcarriers().len() * self.constellation.bits_per_symbol()
    }

    /// Information bits one user carries per frame (0 for pilot-only
    /// layouts).
    pub fn info_bits_per_user(&self) -> usize {
        let coded = self.coded_bits_per_user();
        if coded == 0 {
            0
        } else {
            self.code.info_len(coded).expect("validated in new")
        }
    }

    /// The fixed interleaver of `user`.
    pub fn interleaver(&self, user: usize) -> Interleaver {
        Interleaver::new(
            self.coded_bits_per_user(),
            mix_seed(&[self.interleaver_seed, user as u64]),
        )
    }
}
