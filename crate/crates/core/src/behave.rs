//! Probabilistic response policy.
//!
//! A rating row `r` (average appropriateness, 0..=10, of each robot response
//! to one user action) becomes a probability row
//!
//! ```text
//! p_g = max(r_g - eta, 0)^m / sum_i max(r_i - eta, 0)^m
//! ```
//!
//! over the allowed responses. Both numerator and denominator are clamped,
//! so sub-neutral responses get exactly zero probability and the row still
//! sums to one. A row with no rating above `eta` is degenerate and maps to a
//! fixed fallback response.

use rand_core::RngCore;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::params::EngineParams;
use crate::rng::unit_f64;
use crate::types::GestureClass;

const N: usize = GestureClass::COUNT;

pub type Row = [f64; N];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BehaveError {
    #[error("no response options are allowed")]
    EmptyAllowedSet,
    #[error("rating {value} for {action}/{response} is outside [0, 10]")]
    RatingOutOfRange { action: GestureClass, response: GestureClass, value: f64 },
    #[error("eta must lie in [0, 10] and m must be positive")]
    InvalidShape,
    #[error("row for {0} is degenerate and no fallback is configured")]
    NoFallback(GestureClass),
    #[error("anchor response has zero probability or a rating not above eta")]
    BadAnchor,
}

/// A set of gesture classes, used to restrict the response options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GestureSet(u8);

impl GestureSet {
    pub const ALL: GestureSet = GestureSet(0b1111);
    pub const EMPTY: GestureSet = GestureSet(0);

    pub fn contains(self, g: GestureClass) -> bool {
        self.0 & (1 << g.index()) != 0
    }

    pub fn without(self, g: GestureClass) -> Self {
        GestureSet(self.0 & !(1 << g.index()))
    }

    pub fn with(self, g: GestureClass) -> Self {
        GestureSet(self.0 | (1 << g.index()))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Average ratings indexed `[user action][robot response]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RatingMatrix {
    pub rows: [Row; N],
}

impl RatingMatrix {
    pub fn validate(&self) -> Result<(), BehaveError> {
        for a in GestureClass::ALL {
            for g in GestureClass::ALL {
                let value = self.rows[a.index()][g.index()];
                if !(0.0..=10.0).contains(&value) {
                    return Err(BehaveError::RatingOutOfRange { action: a, response: g, value });
                }
            }
        }
        Ok(())
    }

    pub fn row(&self, action: GestureClass) -> &Row {
        &self.rows[action.index()]
    }
}

/// Result of converting one rating row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyRow {
    Distribution(Row),
    /// Every allowed rating was at or below `eta`.
    Degenerate,
}

fn check_shape(eta: f64, m: f64) -> Result<(), BehaveError> {
    if (0.0..=10.0).contains(&eta) && m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(BehaveError::InvalidShape)
    }
}

/// Convert one rating row into response probabilities over `allowed`.
pub fn policy_row(ratings: &Row, eta: f64, m: f64, allowed: GestureSet) -> Result<PolicyRow, BehaveError> {
    check_shape(eta, m)?;
    if allowed.is_empty() {
        return Err(BehaveError::EmptyAllowedSet);
    }
    let mut weights = [0.0; N];
    for g in GestureClass::ALL {
        if allowed.contains(g) {
            let excess = ratings[g.index()] - eta;
            if excess > 0.0 {
                weights[g.index()] = libm::pow(excess, m);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Ok(PolicyRow::Degenerate);
    }
    Ok(PolicyRow::Distribution(weights.map(|w| w / total)))
}

/// Choose the class whose stacked interval, laid out in class order, contains `u`.
/// Zero-probability classes are never returned.
pub fn sample_row(p: &Row, u: f64) -> GestureClass {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi <= 0.0 {
            continue;
        }
        last_positive = i;
        cum += pi;
        if u < cum {
            return GestureClass::ALL[i];
        }
    }
    // Only reachable through rounding when u is just below 1.
    GestureClass::ALL[last_positive]
}

/// Ratings reproducing `p` under `(eta, m)`: `r_i = eta + (p_i * S)^(1/m)`
/// with `S` fixed by the anchor's rating. Zero-probability entries are
/// pinned to `eta`.
pub fn invert_row(p: &Row, eta: f64, m: f64, anchor: (GestureClass, f64)) -> Result<Row, BehaveError> {
    check_shape(eta, m)?;
    let (g, rating) = anchor;
    let pa = p[g.index()];
    if !(pa > 0.0) || !(rating > eta) {
        return Err(BehaveError::BadAnchor);
    }
    let scale = libm::pow(rating - eta, m) / pa;
    Ok(core::array::from_fn(|i| {
        if i == g.index() {
            rating
        } else if p[i] > 0.0 {
            eta + libm::pow(p[i] * scale, 1.0 / m)
        } else {
            eta
        }
    }))
}

/// Situation in which a response is being chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChoiceContext {
    /// The robot is already holding a modal squeeze, so squeeze is not an option.
    pub in_squeeze_state: bool,
}

/// Precomputed response probabilities plus the ratings behind them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ResponsePolicy {
    /// `[user action][robot response]`; a degenerate row is all zeros.
    pub probabilities: [Row; N],
    pub degenerate: [bool; N],
    pub ratings: RatingMatrix,
    pub eta: f64,
    pub m: f64,
    pub fallback: Option<GestureClass>,
}

/// Published response probabilities, rows and columns in class order.
pub const PUBLISHED_PROBABILITIES: [Row; N] = [
    [0.11, 0.22, 0.10, 0.57],
    [0.01, 0.30, 0.14, 0.55],
    [0.00, 0.27, 0.21, 0.52],
    [0.00, 0.10, 0.09, 0.81],
];

/// Published average ratings of a motionless robot response per user action.
pub const PUBLISHED_HOLD_RATINGS: Row = [6.6, 5.2, 4.9, 4.9];

/// Rating assumed for the squeeze response when reconstructing rows whose
/// hold rating is sub-neutral and therefore cannot anchor the inversion.
pub const RECONSTRUCTION_SQUEEZE_ANCHOR: f64 = 7.5;

impl ResponsePolicy {
    pub fn from_ratings(
        ratings: RatingMatrix,
        eta: f64,
        m: f64,
        fallback: Option<GestureClass>,
    ) -> Result<Self, BehaveError> {
        ratings.validate()?;
        let mut probabilities = [[0.0; N]; N];
        let mut degenerate = [false; N];
        for a in GestureClass::ALL {
            match policy_row(ratings.row(a), eta, m, GestureSet::ALL)? {
                PolicyRow::Distribution(p) => probabilities[a.index()] = p,
                PolicyRow::Degenerate => degenerate[a.index()] = true,
            }
        }
        Ok(Self { probabilities, degenerate, ratings, eta, m, fallback })
    }

    pub fn row(&self, action: GestureClass) -> PolicyRow {
        if self.degenerate[action.index()] {
            PolicyRow::Degenerate
        } else {
            PolicyRow::Distribution(self.probabilities[action.index()])
        }
    }

    /// The row actually sampled in `ctx`: inside a modal squeeze the squeeze
    /// option is dropped and the row recomputed from the ratings.
    pub fn effective_row(&self, action: GestureClass, ctx: ChoiceContext) -> Result<PolicyRow, BehaveError> {
        if ctx.in_squeeze_state {
            policy_row(self.ratings.row(action), self.eta, self.m, GestureSet::ALL.without(GestureClass::Squeeze))
        } else {
            Ok(self.row(action))
        }
    }

    /// Choose a response given a uniform draw `u` in `[0, 1)`.
    pub fn choose_with(&self, action: GestureClass, ctx: ChoiceContext, u: f64) -> Result<GestureClass, BehaveError> {
        match self.effective_row(action, ctx)? {
            PolicyRow::Distribution(p) => Ok(sample_row(&p, u)),
            PolicyRow::Degenerate => self.fallback.ok_or(BehaveError::NoFallback(action)),
        }
    }

    /// Draw one uniform number from `rng` and choose a response with it.
    pub fn choose<R: RngCore + ?Sized>(
        &self,
        action: GestureClass,
        ctx: ChoiceContext,
        rng: &mut R,
    ) -> Result<GestureClass, BehaveError> {
        let u = unit_f64(rng);
        self.choose_with(action, ctx, u)
    }
}

/// Ratings reconstructed from the published probability rows. The hold row
/// and the rub row are anchored on their published hold ratings; the pat and
/// squeeze rows, whose hold ratings are sub-neutral, are anchored on
/// [`RECONSTRUCTION_SQUEEZE_ANCHOR`] and keep their published hold ratings.
pub fn reconstructed_ratings(eta: f64, m: f64) -> Result<RatingMatrix, BehaveError> {
    let mut rows = [[0.0; N]; N];
    for a in GestureClass::ALL {
        let p = &PUBLISHED_PROBABILITIES[a.index()];
        let hold = PUBLISHED_HOLD_RATINGS[a.index()];
        let anchor = if hold > eta && p[0] > 0.0 {
            (GestureClass::Hold, hold)
        } else {
            (GestureClass::Squeeze, RECONSTRUCTION_SQUEEZE_ANCHOR)
        };
        let mut r = invert_row(p, eta, m, anchor)?;
        if p[0] == 0.0 {
            r[0] = hold.min(eta);
        }
        rows[a.index()] = r;
    }
    Ok(RatingMatrix { rows })
}

/// Policy shipping the published probability rows verbatim, with
/// reconstructed ratings for the reduced in-squeeze choice.
pub fn default_policy() -> ResponsePolicy {
    let params = EngineParams::default();
    default_policy_with(params.eta, params.m_exponent)
}

/// As [`default_policy`] but reconstructing ratings under another `(eta, m)`.
pub fn default_policy_with(eta: f64, m: f64) -> ResponsePolicy {
    let ratings = reconstructed_ratings(eta, m).expect("published rows have a valid anchor");
    ResponsePolicy {
        probabilities: PUBLISHED_PROBABILITIES,
        degenerate: [false; N],
        ratings,
        eta,
        m,
        fallback: Some(GestureClass::Hold),
    }
}
