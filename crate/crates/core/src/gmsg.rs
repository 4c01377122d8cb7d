//! Scalar complex Gaussian and discrete message algebra.
//!
//! A [`GaussMsg`] is a circularly-symmetric complex Gaussian CN(x; m, v)
//! carried as a mean/variance pair with `E|x - m|^2 = v`. Infinite variance
//! marks a vacuous message: it is the identity of [`product`] and carries
//! mean zero by convention. A [`DiscreteMsg`] is a non-negative weight
//! vector over the points of a [`Constellation`].
//!
//! All operations are pure and total; the one numerical escape hatch is the
//! variance clamp in [`divide`], which fires when a precision difference is
//! not positive and returns a near-vacuous result instead.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Variance of the near-vacuous message returned when [`divide`] clamps.
pub const VAR_CLAMP_MAX: f64 = 1e12;

/// Precision at or below which [`divide`] clamps.
pub const PRECISION_FLOOR: f64 = 1e-12;

/// A complex Gaussian message or belief: mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMsg {
    pub mean: Complex64,
    pub var: f64,
}

impl GaussMsg {
    pub fn new(mean: Complex64, var: f64) -> Self {
        debug_assert!(var >= 0.0, "negative variance {var}");
        debug_assert!(var.is_infinite() || mean.is_finite());
        Self { mean, var }
    }

    /// The identity of [`product`]: infinite variance, mean zero.
    pub fn vacuous() -> Self {
        Self {
            mean: Complex64::new(0.0, 0.0),
            var: f64::INFINITY,
        }
    }

    /// A point mass (zero variance) at `mean`.
    pub fn point(mean: Complex64) -> Self {
        Self { mean, var: 0.0 }
    }

    pub fn is_vacuous(&self) -> bool {
        self.var.is_infinite()
    }

    /// Inverse variance; 0 for vacuous messages, +inf for point masses.
    pub fn precision(&self) -> f64 {
        1.0 / self.var
    }
}

/// Errors from the message algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgError {
    /// Every weight of a belief underflowed to zero; signals numerical
    /// trouble upstream rather than a recoverable condition here.
    EmptyBelief,
}

impl fmt::Display for MsgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MsgError::EmptyBelief => write!(f, "belief weights are all zero"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MsgError {}

/// Pointwise product of two Gaussian messages, renormalized.
///
/// Precisions add; means combine precision-weighted. Vacuous inputs
/// contribute zero precision, a point mass wins outright.
pub fn product(a: GaussMsg, b: GaussMsg) -> GaussMsg {
    if a.var == 0.0 || b.is_vacuous() {
        return a;
    }
    if b.var == 0.0 || a.is_vacuous() {
        return b;
    }
    let wa = 1.0 / a.var;
    let wb = 1.0 / b.var;
    let w = wa + wb;
    GaussMsg::new((a.mean * wa + b.mean * wb) / w, 1.0 / w)
}

/// Pointwise quotient `num / den` of two Gaussians, clamped.
///
/// The result has precision `1/v_num - 1/v_den`. When that difference is
/// not above [`PRECISION_FLOOR`] the quotient is not a proper Gaussian and
/// a near-vacuous message `(num.mean, VAR_CLAMP_MAX)` is returned instead.
pub fn divide(num: GaussMsg, den: GaussMsg) -> GaussMsg {
    divide_flagged(num, den).0
}

/// Like [`divide`], also reporting whether the clamp fired so callers can
/// log the degenerate division.
pub fn divide_flagged(num: GaussMsg, den: GaussMsg) -> (GaussMsg, bool) {
    debug_assert!(den.var > 0.0, "division by a point mass");
    if num.var == 0.0 {
        return (num, false);
    }
    let w = 1.0 / num.var - 1.0 / den.var;
    if w.is_nan() || w <= PRECISION_FLOOR {
        return (GaussMsg::new(num.mean, VAR_CLAMP_MAX), true);
    }
    let var = 1.0 / w;
    let mean = (num.mean / num.var - den.mean / den.var) * var;
    (GaussMsg::new(mean, var), false)
}

/// Weights over the points of a constellation; non-negative, not
/// necessarily normalized until [`DiscreteMsg::normalize`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMsg {
    pub weights: Vec<f64>,
}

impl DiscreteMsg {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn uniform(q: usize) -> Self {
        Self {
            weights: vec![1.0 / q as f64; q],
        }
    }

    pub fn point_mass(q: usize, index: usize) -> Self {
        let mut weights = vec![0.0; q];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Scale weights to sum to one.
    pub fn normalize(&mut self) -> Result<(), MsgError> {
        let sum: f64 = self.weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(MsgError::EmptyBelief);
        }
        for w in &mut self.weights {
            *w /= sum;
        }
        Ok(())
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}

/// Mean and variance of a normalized discrete message over `c`.
pub fn discrete_moments(msg: &DiscreteMsg, c: &Constellation) -> (Complex64, f64) {
    debug_assert_eq!(msg.len(), c.size());
    let mut mean = Complex64::new(0.0, 0.0);
    let mut power = 0.0;
    for (w, s) in msg.weights.iter().zip(c.points()) {
        mean += s * *w;
        power += w * s.norm_sqr();
    }
    (mean, (power - mean.norm_sqr()).max(0.0))
}

/// Gaussian matching the first two moments of a weighted point set.
pub fn project_gaussian(weighted_points: &[(Complex64, f64)]) -> Result<GaussMsg, MsgError> {
    let mut total = 0.0;
    let mut mean = Complex64::new(0.0, 0.0);
    for &(x, w) in weighted_points {
        debug_assert!(w >= 0.0);
        total += w;
        mean += x * w;
    }
    if !total.is_finite() || total <= 0.0 {
        return Err(MsgError::EmptyBelief);
    }
    mean /= total;
    let mut var = 0.0;
    for &(x, w) in weighted_points {
        var += w * (x - mean).norm_sqr();
    }
    Ok(GaussMsg::new(mean, (var / total).max(0.0)))
}

/// A unit-energy symbol alphabet with Gray labeling.
///
/// Point `i` carries the label whose bits are the binary digits of `i`,
/// most significant first, so the label map is a bijection by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    bits_per_symbol: usize,
    name: &'static str,
}

impl Constellation {
    /// Gray-labeled QPSK: bit 0 picks the in-phase sign, bit 1 the
    /// quadrature sign, `0 -> +1/sqrt(2)`. Label `00` maps to `(1+i)/sqrt(2)`.
    pub fn qpsk() -> Self {
        let a = 1.0 / 2.0f64.sqrt();
        let level = |b: usize| if b == 0 { a } else { -a };
        let points = (0..4)
            .map(|i| Complex64::new(level(i >> 1), level(i & 1)))
            .collect();
        Self {
            points,
            bits_per_symbol: 2,
            name: "qpsk",
        }
    }

    /// Gray-labeled 16-QAM, unit average energy. Bits 0-1 pick the
    /// in-phase level, bits 2-3 the quadrature level, each pair through
    /// the Gray ruler `00,01,11,10 -> +3,+1,-1,-3` scaled by `1/sqrt(10)`.
    pub fn qam16() -> Self {
        let a = 1.0 / 10.0f64.sqrt();
        let level = |b: usize| match b {
            0b00 => 3.0 * a,
            0b01 => a,
            0b11 => -a,
            _ => -3.0 * a,
        };
        let points = (0..16)
            .map(|i| Complex64::new(level(i >> 2), level(i & 0b11)))
            .collect();
        Self {
            points,
            bits_per_symbol: 4,
            name: "qam16",
        }
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Bit `bit` (0 = most significant) of `label`.
    pub fn bit_of(&self, label: usize, bit: usize) -> u8 {
        ((label >> (self.bits_per_symbol - 1 - bit)) & 1) as u8
    }

    /// Label formed by `bits_per_symbol` bits, most significant first.
    pub fn label_of_bits(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.bits_per_symbol);
        bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_equal_variance_averages() {
        let p = product(GaussMsg::new(c(1.0, 0.0), 2.0), GaussMsg::new(c(3.0, 0.0), 2.0));
        assert_relative_eq!(p.mean.re, 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.mean.im, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn product_vacuous_is_identity() {
        let a = GaussMsg::new(c(0.7, -0.2), 0.31);
        let p = product(a, GaussMsg::vacuous());
        assert_eq!(p, a);
        let p = product(GaussMsg::vacuous(), a);
        assert_eq!(p, a);
    }

    /// Grid oracle: evaluate the two pdfs pointwise, multiply, and refit
    /// mean/variance by numerical moments.
    #[test]
    fn product_matches_grid_moments() {
        let a = GaussMsg::new(c(1.0, 1.0), 0.5);
        let b = GaussMsg::new(c(-1.0, 0.0), 0.25);
        let log_pdf = |m: &GaussMsg, x: Complex64| -(x - m.mean).norm_sqr() / m.var;

        // Both factors live well inside [-8, 8]^2; step 0.01 is far below
        // either standard deviation.
        let n = 1601;
        let step = 16.0 / (n - 1) as f64;
        let mut total = 0.0;
        let mut mean = c(0.0, 0.0);
        let mut power = 0.0;
        for i in 0..n {
            let re = -8.0 + i as f64 * step;
            for j in 0..n {
                let x = c(re, -8.0 + j as f64 * step);
                let w = (log_pdf(&a, x) + log_pdf(&b, x)).exp();
                total += w;
                mean += x * w;
                power += w * x.norm_sqr();
            }
        }
        mean /= total;
        let var = power / total - mean.norm_sqr();

        let p = product(a, b);
        assert_relative_eq!(p.mean.re, mean.re, epsilon = 1e-6);
        assert_relative_eq!(p.mean.im, mean.im, epsilon = 1e-6);
        assert_relative_eq!(p.var, var, max_relative = 1e-6);
    }

    #[test]
    fn divide_recovers_product_factor() {
        let a = GaussMsg::new(c(0.4, -1.2), 0.7);
        let b = GaussMsg::new(c(-0.3, 0.9), 2.1);
        let (q, clamped) = divide_flagged(product(a, b), b);
        assert!(!clamped);
        assert_relative_eq!(q.mean.re, a.mean.re, max_relative = 1e-10);
        assert_relative_eq!(q.mean.im, a.mean.im, max_relative = 1e-10);
        assert_relative_eq!(q.var, a.var, max_relative = 1e-10);
    }

    #[test]
    fn divide_zero_means() {
        let q = divide(GaussMsg::new(c(0.0, 0.0), 1.0), GaussMsg::new(c(0.0, 0.0), 2.0));
        assert_relative_eq!(q.var, 2.0, epsilon = 1e-12);
        assert_eq!(q.mean, c(0.0, 0.0));
    }

    #[test]
    fn divide_clamps_on_nonpositive_precision() {
        let num = GaussMsg::new(c(1.0, 0.0), 2.0);
        let den = GaussMsg::new(c(0.0, 0.0), 1.0);
        let (q, clamped) = divide_flagged(num, den);
        assert!(clamped);
        assert_eq!(q.var, VAR_CLAMP_MAX);
        assert_eq!(q.mean, num.mean);
    }

    #[test]
    fn discrete_moments_uniform_qpsk() {
        let c4 = Constellation::qpsk();
        let (mean, var) = discrete_moments(&DiscreteMsg::uniform(4), &c4);
        assert!(mean.norm() < 1e-15);
        assert_relative_eq!(var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn discrete_moments_point_mass() {
        let c4 = Constellation::qpsk();
        let (mean, var) = discrete_moments(&DiscreteMsg::point_mass(4, 2), &c4);
        assert_eq!(mean, c4.point(2));
        assert_eq!(var, 0.0);
    }

    #[test]
    fn discrete_moments_weighted_qpsk_matches_direct_sum() {
        let c4 = Constellation::qpsk();
        let msg = DiscreteMsg::new(alloc::vec![0.7, 0.1, 0.1, 0.1]);
        let mut mean = c(0.0, 0.0);
        let mut power = 0.0;
        for s in 0..4 {
            mean += c4.point(s) * msg.weights[s];
            power += msg.weights[s] * c4.point(s).norm_sqr();
        }
        let expect_var = power - mean.norm_sqr();
        let (m, v) = discrete_moments(&msg, &c4);
        assert_relative_eq!(m.re, mean.re, epsilon = 1e-14);
        assert_relative_eq!(m.im, mean.im, epsilon = 1e-14);
        assert_relative_eq!(v, expect_var, epsilon = 1e-14);
    }

    #[test]
    fn project_single_point_is_point_mass() {
        let g = project_gaussian(&[(c(0.3, -0.4), 1.0)]).unwrap();
        assert_eq!(g.mean, c(0.3, -0.4));
        assert_eq!(g.var, 0.0);
    }

    #[test]
    fn project_symmetric_pair() {
        let g = project_gaussian(&[(c(1.0, 0.0), 0.5), (c(-1.0, 0.0), 0.5)]).unwrap();
        assert!(g.mean.norm() < 1e-15);
        assert_relative_eq!(g.var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn project_qpsk_likelihood_matches_direct_sum() {
        let c4 = Constellation::qpsk();
        let center = c(0.3, 0.2);
        let nu = 0.8;
        let pts: Vec<(Complex64, f64)> = c4
            .points()
            .iter()
            .map(|&s| (s, (-(s - center).norm_sqr() / nu).exp()))
            .collect();

        let total: f64 = pts.iter().map(|p| p.1).sum();
        let mean = pts.iter().map(|&(x, w)| x * w).sum::<Complex64>() / total;
        let var = pts.iter().map(|&(x, w)| w * (x - mean).norm_sqr()).sum::<f64>() / total;

        let g = project_gaussian(&pts).unwrap();
        assert_relative_eq!(g.mean.re, mean.re, epsilon = 1e-14);
        assert_relative_eq!(g.mean.im, mean.im, epsilon = 1e-14);
        assert_relative_eq!(g.var, var, epsilon = 1e-14);
    }

    #[test]
    fn project_rejects_all_zero_weights() {
        assert_eq!(
            project_gaussian(&[(c(1.0, 0.0), 0.0), (c(2.0, 0.0), 0.0)]),
            Err(MsgError::EmptyBelief)
        );
    }

    #[test]
    fn constellations_have_unit_energy_and_bijective_labels() {
        for cst in [Constellation::qpsk(), Constellation::qam16()] {
            let q = cst.size();
            let energy: f64 = cst.points().iter().map(|s| s.norm_sqr()).sum::<f64>() / q as f64;
            assert_relative_eq!(energy, 1.0, epsilon = 1e-12);
            for a in 0..q {
                for b in (a + 1)..q {
                    assert_ne!(cst.point(a), cst.point(b));
                }
            }
        }
    }

    #[test]
    fn qpsk_label_zero_is_first_quadrant() {
        let c4 = Constellation::qpsk();
        let a = 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(c4.point(0).re, a, epsilon = 1e-15);
        assert_relative_eq!(c4.point(0).im, a, epsilon = 1e-15);
        assert_eq!(c4.label_of_bits(&[0, 0]), 0);
        for s in 0..4 {
            assert_relative_eq!(c4.point(s).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn qam16_energy_is_sixteen_term_average() {
        let c16 = Constellation::qam16();
        let sum: f64 = (0..16).map(|s| c16.point(s).norm_sqr()).sum();
        assert_relative_eq!(sum / 16.0, 1.0, epsilon = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn msg() -> impl Strategy<Value = GaussMsg> {
            (
                -5.0f64..5.0,
                -5.0f64..5.0,
                0.01f64..100.0,
            )
                .prop_map(|(re, im, v)| GaussMsg::new(Complex64::new(re, im), v))
        }

        proptest! {
            #[test]
            fn product_commutes(a in msg(), b in msg()) {
                let ab = product(a, b);
                let ba = product(b, a);
                prop_assert!((ab.mean - ba.mean).norm() <= 1e-12 * (1.0 + ab.mean.norm()));
                prop_assert!((ab.var - ba.var).abs() <= 1e-12 * ab.var);
            }

            #[test]
            fn product_associates(a in msg(), b in msg(), c in msg()) {
                let l = product(product(a, b), c);
                let r = product(a, product(b, c));
                prop_assert!((l.mean - r.mean).norm() <= 1e-12 * (1.0 + l.mean.norm()));
                prop_assert!((l.var - r.var).abs() <= 1e-12 * l.var);
            }

            #[test]
            fn product_never_increases_variance(a in msg(), b in msg()) {
                let p = product(a, b);
                prop_assert!(p.var <= a.var.min(b.var) * (1.0 + 1e-12));
            }

            #[test]
            fn divide_undoes_product(a in msg(), b in msg()) {
                prop_assume!((a.var - b.var).abs() > 1e-6 * a.var.max(b.var));
                let (q, clamped) = divide_flagged(product(a, b), b);
                prop_assert!(!clamped);
                prop_assert!((q.mean - a.mean).norm() <= 1e-10 * (1.0 + a.mean.norm()));
                prop_assert!((q.var - a.var).abs() <= 1e-10 * a.var);
            }

            #[test]
            fn discrete_variance_nonnegative(raw in proptest::collection::vec(0.0f64..1.0, 4)) {
                prop_assume!(raw.iter().sum::<f64>() > 1e-9);
                let mut m = DiscreteMsg::new(raw);
                m.normalize().unwrap();
                let (_, v) = discrete_moments(&m, &Constellation::qpsk());
                prop_assert!(v >= 0.0);
            }
        }
    }
}
