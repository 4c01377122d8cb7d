//! The iterative receiver: joint multiuser cancellation, soft
//! demodulation/decoding, channel estimation, and noise-precision
//! estimation on one observed frame.
//!
//! The product constraint `z = x h` is handled by first collapsing it
//! against the incoming Gaussian `z` message (a BP-style marginalization,
//! which leaves a Gaussian in `x h`) and then taking the mean-field
//! expectation of its logarithm under the other factor's belief. That
//! yields closed-form Gaussian messages toward both the symbol and the
//! channel weight at `O(1)` cost per (antenna, user, subcarrier):
//!
//! - toward the symbol: mean `conj(h_hat) z / (|h_hat|^2 + v_h)`,
//!   variance `v_z / (|h_hat|^2 + v_h)`;
//! - toward the channel weight: the same form with symbol and channel
//!   moments exchanged.
//!
//! The belief of `z` itself has moments `z_hat = x_hat h_hat` and
//! `v_z = |x_hat|^2 v_h + |h_hat|^2 v_x + v_h v_x`; its Gaussian
//! projection divided by the incoming message is the extrinsic sent to
//! the per-subcarrier sum node, which drives interference cancellation.
//! The noise precision is re-estimated each iteration from the residual
//! power plus the summed belief variances under the improper `1/lambda`
//! prior.
//!
//! One iteration runs, in order: interference cancellation, symbol
//! messages and combining across antennas, demap/decode/re-prior, channel
//! messages and the tap-domain prior update, `z` beliefs and extrinsics,
//! noise precision. Pilot beliefs stay pinned, and subcarriers silenced
//! by another user's pilot never carry messages.

pub mod chanest;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::frame::bit_errors;
use crate::gmsg::{self, Constellation, DiscreteMsg, GaussMsg, MsgError};
use crate::phy::{ChannelRealization, Observation};
use crate::system::SystemConfig;
use crate::txchain::{self, decode_siso, Interleaver};

pub use chanest::{channel_prior_update, tap_posterior, DftTable};

/// Ceiling kept on every stored variance; divisions clamp to it.
pub const VAR_CEILING: f64 = gmsg::VAR_CLAMP_MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RxError {
    /// `|h_hat|^2 + v_h` underflowed; the channel belief was never seeded.
    ZeroChannelBelief,
    /// `|x_hat|^2 + v_x` underflowed on an active subcarrier.
    ZeroSymbolBelief,
    /// The regularized tap system failed to factorize.
    SingularTapSystem,
    /// A discrete belief lost all mass.
    Belief(MsgError),
}

impl fmt::Display for RxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RxError::ZeroChannelBelief => write!(f, "channel belief has zero energy"),
            RxError::ZeroSymbolBelief => write!(f, "symbol belief has zero energy"),
            RxError::SingularTapSystem => write!(f, "tap-domain system is singular"),
            RxError::Belief(e) => e.fmt(f),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RxError {}

impl From<MsgError> for RxError {
    fn from(e: MsgError) -> Self {
        RxError::Belief(e)
    }
}

const ENERGY_FLOOR: f64 = 1e-30;

/// Message from the product factor toward the symbol, given the incoming
/// `z` message and the channel belief.
pub fn msg_fz_to_x(cev_z: GaussMsg, h_belief: GaussMsg) -> Result<GaussMsg, RxError> {
    let denom = h_belief.mean.norm_sqr() + h_belief.var;
    if denom < ENERGY_FLOOR {
        return Err(RxError::ZeroChannelBelief);
    }
    Ok(GaussMsg::new(
        h_belief.mean.conj() * cev_z.mean / denom,
        cev_z.var / denom,
    ))
}

/// Message from the product factor toward the channel weight, given the
/// incoming `z` message and the symbol belief moments.
pub fn msg_fz_to_h(cev_z: GaussMsg, x_mean: Complex64, x_var: f64) -> Result<GaussMsg, RxError> {
    let denom = x_mean.norm_sqr() + x_var;
    if denom < ENERGY_FLOOR {
        return Err(RxError::ZeroSymbolBelief);
    }
    Ok(GaussMsg::new(
        x_mean.conj() * cev_z.mean / denom,
        cev_z.var / denom,
    ))
}

/// Product of the per-antenna symbol messages: the Gaussian evidence
/// handed to soft demodulation.
pub fn combine_x<I: IntoIterator<Item = GaussMsg>>(msgs: I) -> GaussMsg {
    msgs.into_iter().fold(GaussMsg::vacuous(), gmsg::product)
}

/// Discrete symbol belief: prior weights times the Gaussian evidence
/// evaluated at each point, normalized, with its mean and variance.
pub fn belief_x(
    evidence: GaussMsg,
    prior: &DiscreteMsg,
    c: &Constellation,
) -> Result<(DiscreteMsg, Complex64, f64), RxError> {
    debug_assert!(evidence.var > 0.0);
    let mut logw = Vec::with_capacity(c.size());
    for (label, &w) in prior.weights.iter().enumerate() {
        let metric = if evidence.var.is_infinite() {
            0.0
        } else {
            -(c.point(label) - evidence.mean).norm_sqr() / evidence.var
        };
        logw.push(w.ln() + metric);
    }
    let peak = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(MsgError::EmptyBelief.into());
    }
    let mut belief = DiscreteMsg::new(logw.iter().map(|&lw| (lw - peak).exp()).collect());
    belief.normalize().map_err(RxError::from)?;
    let (mean, var) = gmsg::discrete_moments(&belief, c);
    Ok((belief, mean, var))
}

/// Channel-weight belief: product of the prior-side and observation-side
/// messages.
pub fn belief_h(extr_in: GaussMsg, extr_out: GaussMsg) -> GaussMsg {
    gmsg::product(extr_in, extr_out)
}

/// Moments of the product `z = x h` under independent beliefs.
pub fn belief_z(x_mean: Complex64, x_var: f64, h_mean: Complex64, h_var: f64) -> GaussMsg {
    GaussMsg::new(
        x_mean * h_mean,
        x_mean.norm_sqr() * h_var + h_mean.norm_sqr() * x_var + h_var * x_var,
    )
}

/// Extrinsic from the product factor to the sum node: the projected `z`
/// belief divided by the incoming message, clamp reported.
pub fn msg_z_extrinsic(z_belief: GaussMsg, cev_z: GaussMsg) -> (GaussMsg, bool) {
    gmsg::divide_flagged(z_belief, cev_z)
}

/// Mean-field noise-precision estimate from residual power and belief
/// variances: `lambda = M K / sum(|y - tau|^2 + v_tau)`. Returns the
/// clamped ceiling (flagged) when the residual degenerates.
pub fn noise_precision_update(
    y: &Observation,
    z_belief: &[GaussMsg],
    n_users: usize,
) -> (f64, bool) {
    let m_ant = y.m_antennas();
    let k_sub = y.k_subcarriers();
    debug_assert_eq!(z_belief.len(), m_ant * n_users * k_sub);
    let mut denom = 0.0;
    for m in 0..m_ant {
        for k in 0..k_sub {
            let mut tau = Complex64::new(0.0, 0.0);
            let mut v_tau = 0.0;
            for n in 0..n_users {
                let zb = z_belief[(m * n_users + n) * k_sub + k];
                tau += zb.mean;
                v_tau += zb.var;
            }
            denom += (y.y(m, k) - tau).norm_sqr() + v_tau;
        }
    }
    let lambda = (m_ant * k_sub) as f64 / denom;
    if lambda.is_finite() && lambda > 0.0 && lambda <= VAR_CEILING {
        (lambda, false)
    } else {
        (VAR_CEILING, true)
    }
}

fn damp(old: GaussMsg, new: GaussMsg, factor: Option<f64>) -> GaussMsg {
    let Some(d) = factor else { return new };
    if old.is_vacuous() {
        return new;
    }
    let wo = (1.0 - d) / old.var;
    let wn = d / new.var;
    let w = wo + wn;
    GaussMsg::new((old.mean * wo + new.mean * wn) / w, 1.0 / w)
}

/// Role of one (user, subcarrier) slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotKind {
    /// Carries a coded data symbol (index into the user's symbol stream).
    Data(usize),
    /// Carries this user's pilot.
    Pilot,
    /// Another user's pilot subcarrier; this user is silent.
    Silent,
}

/// Precomputed per-frame constants shared across iterations.
pub struct RxWorkspace {
    dft: DftTable,
    interleavers: Vec<Interleaver>,
    data_k: Vec<usize>,
    kinds: Vec<SlotKind>, // (n, k)
}

impl RxWorkspace {
    pub fn new(sys: &SystemConfig) -> Self {
        let data_k = sys.data_subcarriers();
        let mut data_pos = vec![None; sys.k_subcarriers];
        for (i, &k) in data_k.iter().enumerate() {
            data_pos[k] = Some(i);
        }
        let mut kinds = Vec::with_capacity(sys.n_users * sys.k_subcarriers);
        for n in 0..sys.n_users {
            for (k, &pos) in data_pos.iter().enumerate() {
                kinds.push(match (sys.pattern.owner(k), pos) {
                    (Some(owner), _) if owner == n => SlotKind::Pilot,
                    (Some(_), _) => SlotKind::Silent,
                    (None, Some(pos)) => SlotKind::Data(pos),
                    (None, None) => unreachable!("non-pilot subcarrier must be data"),
                });
            }
        }
        Self {
            dft: DftTable::new(sys.k_subcarriers, sys.l_taps),
            interleavers: (0..sys.n_users).map(|n| sys.interleaver(n)).collect(),
            data_k,
            kinds,
        }
    }
}

/// Genie side information a receiver may be granted in experiments.
#[derive(Debug, Clone, Copy, Default)]
pub struct GenieAids<'a> {
    /// Fix channel beliefs to the true response and skip estimation.
    pub channel: Option<&'a ChannelRealization>,
    /// Fix the noise precision and skip its update.
    pub lambda: Option<f64>,
}

impl GenieAids<'_> {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Ground truth used only for per-iteration diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub channel: &'a ChannelRealization,
    pub info_bits: &'a [Vec<u8>],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationDiag {
    pub iteration: usize,
    pub lambda_hat: f64,
    /// Channel NMSE in dB against the true response, when truth is given.
    pub nmse_db: Option<f64>,
    /// Information BER of this iteration's hard decisions, when truth is
    /// given and the frame carries data.
    pub ber: Option<f64>,
    /// Divisions and precision updates caught by the clamp policy.
    pub clamp_events: usize,
}

/// Channel beliefs over the (antenna, user, subcarrier) grid.
#[derive(Debug, Clone)]
pub struct BeliefGrid {
    m_antennas: usize,
    n_users: usize,
    k_subcarriers: usize,
    msgs: Vec<GaussMsg>,
}

impl BeliefGrid {
    pub(crate) fn from_msgs(
        m_antennas: usize,
        n_users: usize,
        k_subcarriers: usize,
        msgs: Vec<GaussMsg>,
    ) -> Self {
        debug_assert_eq!(msgs.len(), m_antennas * n_users * k_subcarriers);
        Self {
            m_antennas,
            n_users,
            k_subcarriers,
            msgs,
        }
    }

    pub fn get(&self, m: usize, n: usize, k: usize) -> GaussMsg {
        self.msgs[(m * self.n_users + n) * self.k_subcarriers + k]
    }

    /// `sum |mean - h|^2 / sum |h|^2` in dB.
    pub fn nmse_db(&self, ch: &ChannelRealization) -> f64 {
        let mut err = 0.0;
        let mut pow = 0.0;
        for m in 0..self.m_antennas {
            for n in 0..self.n_users {
                for k in 0..self.k_subcarriers {
                    let h = ch.h(m, n, k);
                    err += (self.get(m, n, k).mean - h).norm_sqr();
                    pow += h.norm_sqr();
                }
            }
        }
        10.0 * (err / pow).log10()
    }
}

/// Receiver output: hard decisions, final channel beliefs, final noise
/// precision, and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct RxOutput {
    pub bits: Vec<Vec<u8>>,
    pub h_belief: BeliefGrid,
    pub lambda_hat: f64,
    pub iterations: Vec<IterationDiag>,
}

/// All per-frame message state, advanced by [`ReceiverState::iterate`].
pub struct ReceiverState {
    m_antennas: usize,
    n_users: usize,
    k_subcarriers: usize,
    pub cev_z: Vec<GaussMsg>,
    pub vec_z: Vec<GaussMsg>,
    pub h_extr_in: Vec<GaussMsg>,
    pub h_extr_out: Vec<GaussMsg>,
    pub h_belief: Vec<GaussMsg>,
    pub z_belief: Vec<GaussMsg>,
    pub x_mean: Vec<Complex64>,
    pub x_var: Vec<f64>,
    /// Coded-bit extrinsics from the decoder, channel order, per user.
    pub dec_ext: Vec<Vec<f64>>,
    pub hard_bits: Vec<Vec<u8>>,
    pub lambda_hat: f64,
}

impl ReceiverState {
    #[inline]
    pub fn mnk(&self, m: usize, n: usize, k: usize) -> usize {
        (m * self.n_users + n) * self.k_subcarriers + k
    }

    #[inline]
    pub fn nk(&self, n: usize, k: usize) -> usize {
        n * self.k_subcarriers + k
    }

    /// Pilot-bootstrapped start: pilot beliefs pinned, data beliefs at the
    /// uniform-prior moments (0, 1), silence pinned to zero; channel
    /// beliefs at the prior marginal CN(0, 1); interference extrinsics
    /// vacuous; `lambda` from the scale-aware guess `0.5 M K / sum |y|^2`.
    pub fn new(sys: &SystemConfig, ws: &RxWorkspace, y: &Observation, genie: &GenieAids) -> Self {
        let (m_ant, n_users, k_sub) = (sys.m_antennas, sys.n_users, sys.k_subcarriers);
        let total = m_ant * n_users * k_sub;
        let zero = Complex64::new(0.0, 0.0);
        let mut state = Self {
            m_antennas: m_ant,
            n_users,
            k_subcarriers: k_sub,
            cev_z: vec![GaussMsg::vacuous(); total],
            vec_z: vec![GaussMsg::vacuous(); total],
            h_extr_in: vec![GaussMsg::new(zero, 1.0); total],
            h_extr_out: vec![GaussMsg::vacuous(); total],
            h_belief: vec![GaussMsg::new(zero, 1.0); total],
            z_belief: vec![GaussMsg::point(zero); total],
            x_mean: vec![zero; n_users * k_sub],
            x_var: vec![1.0; n_users * k_sub],
            dec_ext: (0..n_users)
                .map(|_| vec![0.0; sys.coded_bits_per_user()])
                .collect(),
            hard_bits: vec![Vec::new(); n_users],
            lambda_hat: 1.0,
        };
        for n in 0..n_users {
            for k in 0..k_sub {
                let i = state.nk(n, k);
                match ws.kinds[i] {
                    SlotKind::Pilot => {
                        state.x_mean[i] = crate::phy::pilot_symbol();
                        state.x_var[i] = 0.0;
                    }
                    SlotKind::Silent => {
                        state.x_var[i] = 0.0;
                        for m in 0..m_ant {
                            let j = state.mnk(m, n, k);
                            state.vec_z[j] = GaussMsg::point(zero);
                        }
                    }
                    SlotKind::Data(_) => {}
                }
            }
        }
        if let Some(ch) = genie.channel {
            for m in 0..m_ant {
                for n in 0..n_users {
                    for k in 0..k_sub {
                        let j = state.mnk(m, n, k);
                        state.h_belief[j] = GaussMsg::point(ch.h(m, n, k));
                    }
                }
            }
        }
        state.lambda_hat = genie.lambda.unwrap_or_else(|| {
            let mut pow = 0.0;
            for m in 0..m_ant {
                for k in 0..k_sub {
                    pow += y.y(m, k).norm_sqr();
                }
            }
            if pow > 0.0 {
                0.5 * (m_ant * k_sub) as f64 / pow
            } else {
                1.0
            }
        });
        state
    }

    /// Interference cancellation: rebuild every incoming `z` message from
    /// the observation, the other users' extrinsics, and the current noise
    /// precision.
    pub fn interference_msg(&mut self, y: &Observation) {
        let noise_var = 1.0 / self.lambda_hat;
        let zero = Complex64::new(0.0, 0.0);
        for m in 0..self.m_antennas {
            for k in 0..self.k_subcarriers {
                let mut mean_total = zero;
                let mut var_total = 0.0;
                let mut vacuous = 0usize;
                for n in 0..self.n_users {
                    let v = self.vec_z[self.mnk(m, n, k)];
                    mean_total += v.mean;
                    if v.is_vacuous() {
                        vacuous += 1;
                    } else {
                        var_total += v.var;
                    }
                }
                for n in 0..self.n_users {
                    let i = self.mnk(m, n, k);
                    let own = self.vec_z[i];
                    let others_vacuous = vacuous - own.is_vacuous() as usize;
                    let msg = if others_vacuous > 0 {
                        GaussMsg::vacuous()
                    } else {
                        let own_var = if own.is_vacuous() { 0.0 } else { own.var };
                        GaussMsg::new(
                            y.y(m, k) - (mean_total - own.mean),
                            noise_var + (var_total - own_var).max(0.0),
                        )
                    };
                    self.cev_z[i] = msg;
                }
            }
        }
    }

    /// One full schedule pass. Returns the number of clamp events.
    pub fn iterate(
        &mut self,
        y: &Observation,
        sys: &SystemConfig,
        ws: &RxWorkspace,
        genie: &GenieAids,
    ) -> Result<usize, RxError> {
        let mut clamps = 0usize;

        // (1) interference cancellation
        self.interference_msg(y);

        // (2)+(3) symbol evidence, demodulation, decoding, new beliefs
        if !ws.data_k.is_empty() {
            let mut evidence = vec![GaussMsg::vacuous(); ws.data_k.len()];
            for n in 0..sys.n_users {
                for (pos, &k) in ws.data_k.iter().enumerate() {
                    let mut acc = GaussMsg::vacuous();
                    for m in 0..self.m_antennas {
                        let i = self.mnk(m, n, k);
                        let msg = msg_fz_to_x(self.cev_z[i], self.h_belief[i])?;
                        acc = gmsg::product(acc, msg);
                    }
                    evidence[pos] = acc;
                }
                let demod_ext = txchain::demap(
                    &evidence,
                    &self.dec_ext[n],
                    &sys.constellation,
                    sys.demap_mode,
                );
                let dec_in = ws.interleavers[n].deinterleave(&demod_ext);
                let (dec_out, hard) = decode_siso(&sys.code, &dec_in, sys.demap_mode);
                self.dec_ext[n] = ws.interleavers[n].interleave(&dec_out);
                self.hard_bits[n] = hard;
                let priors = txchain::symbol_prior(&self.dec_ext[n], &sys.constellation);
                for (pos, &k) in ws.data_k.iter().enumerate() {
                    let (_, mean, var) =
                        belief_x(evidence[pos], &priors[pos], &sys.constellation)?;
                    let i = self.nk(n, k);
                    self.x_mean[i] = mean;
                    self.x_var[i] = var;
                }
            }
        }

        // (4) channel messages and the tap-domain prior
        if genie.channel.is_none() {
            let mut row = vec![GaussMsg::vacuous(); self.k_subcarriers];
            for m in 0..self.m_antennas {
                for n in 0..self.n_users {
                    for (k, slot) in row.iter_mut().enumerate() {
                        let i = self.mnk(m, n, k);
                        let msg = match ws.kinds[self.nk(n, k)] {
                            SlotKind::Silent => GaussMsg::vacuous(),
                            _ => {
                                let xi = self.nk(n, k);
                                msg_fz_to_h(self.cev_z[i], self.x_mean[xi], self.x_var[xi])?
                            }
                        };
                        self.h_extr_out[i] = msg;
                        *slot = msg;
                    }
                    let (extr_in, _, c) = channel_prior_update(&row, &ws.dft)?;
                    clamps += c;
                    for (k, &msg_in) in extr_in.iter().enumerate() {
                        let i = self.mnk(m, n, k);
                        self.h_extr_in[i] = msg_in;
                        self.h_belief[i] = belief_h(msg_in, self.h_extr_out[i]);
                    }
                }
            }
        }

        // (5) z beliefs and extrinsics toward the sum node
        for n in 0..sys.n_users {
            for k in 0..self.k_subcarriers {
                if ws.kinds[self.nk(n, k)] == SlotKind::Silent {
                    continue;
                }
                let xi = self.nk(n, k);
                let (x_mean, x_var) = (self.x_mean[xi], self.x_var[xi]);
                for m in 0..self.m_antennas {
                    let i = self.mnk(m, n, k);
                    let h = self.h_belief[i];
                    let zb = belief_z(x_mean, x_var, h.mean, h.var);
                    self.z_belief[i] = zb;
                    let (extr, clamped) = msg_z_extrinsic(zb, self.cev_z[i]);
                    clamps += clamped as usize;
                    self.vec_z[i] = damp(self.vec_z[i], extr, sys.damping);
                }
            }
        }

        // (6) noise precision
        if genie.lambda.is_none() {
            let (lambda, clamped) = noise_precision_update(y, &self.z_belief, self.n_users);
            self.lambda_hat = lambda;
            clamps += clamped as usize;
        }

        Ok(clamps)
    }

    pub fn belief_grid(&self) -> BeliefGrid {
        BeliefGrid {
            m_antennas: self.m_antennas,
            n_users: self.n_users,
            k_subcarriers: self.k_subcarriers,
            msgs: self.h_belief.clone(),
        }
    }
}

/// Run the full schedule for `sys.iterations` passes.
pub fn run_receiver(
    y: &Observation,
    sys: &SystemConfig,
    genie: GenieAids,
    truth: Option<Truth>,
) -> Result<RxOutput, RxError> {
    let ws = RxWorkspace::new(sys);
    let mut state = ReceiverState::new(sys, &ws, y, &genie);
    let mut iterations = Vec::with_capacity(sys.iterations);
    for it in 0..sys.iterations {
        let clamp_events = state.iterate(y, sys, &ws, &genie)?;
        iterations.push(diag(it, &state, truth.as_ref(), clamp_events));
    }
    Ok(RxOutput {
        bits: state.hard_bits.clone(),
        h_belief: state.belief_grid(),
        lambda_hat: state.lambda_hat,
        iterations,
    })
}

fn diag(
    iteration: usize,
    state: &ReceiverState,
    truth: Option<&Truth>,
    clamp_events: usize,
) -> IterationDiag {
    let (nmse_db, ber) = match truth {
        None => (None, None),
        Some(t) => {
            let nmse = state.belief_grid().nmse_db(t.channel);
            let total: usize = t.info_bits.iter().map(|b| b.len()).sum();
            let ber = (total > 0).then(|| {
                let errs: usize = t
                    .info_bits
                    .iter()
                    .zip(&state.hard_bits)
                    .map(|(a, b)| bit_errors(a, b))
                    .sum();
                errs as f64 / total as f64
            });
            (Some(nmse), ber)
        }
    };
    IterationDiag {
        iteration,
        lambda_hat: state.lambda_hat,
        nmse_db,
        ber,
        clamp_events,
    }
}
