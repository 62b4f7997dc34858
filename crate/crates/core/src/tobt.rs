//! Closed-form pairwise ranking models over positive competitor strengths.
//!
//! `bt_prob` is the classic two-outcome model P(1 beats 2) = l1 / (l1 + l2).
//! `tobt_probs` extends it with a tie buffer `alpha`: the log-strength gap
//! must exceed `alpha` before one side counts as preferred, which leaves the
//! tie outcome positive mass
//!
//! ```text
//! prefer    = l1 / (l1 + phi*l2)                       phi = exp(alpha)
//! disprefer = l2 / (l2 + phi*l1)
//! tie       = l1*l2*(phi^2 - 1) / ((l1 + phi*l2)(phi*l1 + l2))
//! ```
//!
//! All three depend on the pair only through d = ln(l1) - ln(l2), so every
//! entry point funnels into one log-space kernel and nothing here
//! exponentiates a raw strength or reward.

use thiserror::Error;

use crate::numeric::{log_expm1, sigmoid, softplus};

/// Smallest strength accepted; keeps ln(strength) finite and normal.
pub const MIN_STRENGTH: f64 = 1e-300;
/// Largest strength accepted.
pub const MAX_STRENGTH: f64 = 1e300;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("strength must be finite and within [{MIN_STRENGTH:e}, {MAX_STRENGTH:e}], got {0}")]
    InvalidStrength(f64),
    #[error("tie buffer alpha must be finite and non-negative with exp(alpha) finite, got {0}")]
    InvalidAlpha(f64),
    #[error("log-strength difference must be finite, got {0}")]
    InvalidLogDiff(f64),
    #[error(
        "components do not form a rank distribution: prefer={prefer}, disprefer={disprefer}, tie={tie}"
    )]
    NotNormalized {
        prefer: f64,
        disprefer: f64,
        tie: f64,
    },
}

/// Positive competitor strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strength(f64);

impl Strength {
    pub fn new(value: f64) -> Result<Self, ModelError> {
        if !value.is_finite() || !(MIN_STRENGTH..=MAX_STRENGTH).contains(&value) {
            return Err(ModelError::InvalidStrength(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn ln(self) -> f64 {
        self.0.ln()
    }
}

/// Tie buffer `alpha` together with its exponential form `phi = exp(alpha)`.
///
/// `alpha = 0` is admitted as the degenerate no-tie case: the ternary model
/// collapses to `bt_prob` and the tie mass is identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieParam {
    alpha: f64,
    phi: f64,
}

impl TieParam {
    pub fn new(alpha: f64) -> Result<Self, ModelError> {
        let phi = alpha.exp();
        if !alpha.is_finite() || alpha < 0.0 || !phi.is_finite() {
            return Err(ModelError::InvalidAlpha(alpha));
        }
        Ok(Self { alpha, phi })
    }

    pub fn alpha(self) -> f64 {
        self.alpha
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    /// True for alpha = 0, where the tie outcome carries no mass.
    pub fn is_degenerate(self) -> bool {
        self.alpha == 0.0
    }
}

/// d = ln(l1) - ln(l2), the log-strength gap the model depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogStrengthDiff(f64);

impl LogStrengthDiff {
    pub fn new(d: f64) -> Result<Self, ModelError> {
        if !d.is_finite() {
            return Err(ModelError::InvalidLogDiff(d));
        }
        Ok(Self(d))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Ternary rank distribution for one ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankProbabilities {
    prefer: f64,
    disprefer: f64,
    tie: f64,
}

impl RankProbabilities {
    /// Validates that the components lie in [0, 1] and sum to 1 within 1e-12.
    pub fn new(prefer: f64, disprefer: f64, tie: f64) -> Result<Self, ModelError> {
        let in_range =
            |p: f64| p.is_finite() && (-NORMALIZATION_TOL..=1.0 + NORMALIZATION_TOL).contains(&p);
        let sum = prefer + disprefer + tie;
        if !in_range(prefer)
            || !in_range(disprefer)
            || !in_range(tie)
            || (sum - 1.0).abs() > NORMALIZATION_TOL
        {
            return Err(ModelError::NotNormalized {
                prefer,
                disprefer,
                tie,
            });
        }
        Ok(Self {
            prefer,
            disprefer,
            tie,
        })
    }

    fn new_unchecked(prefer: f64, disprefer: f64, tie: f64) -> Self {
        debug_assert!((prefer + disprefer + tie - 1.0).abs() <= NORMALIZATION_TOL);
        Self {
            prefer,
            disprefer,
            tie,
        }
    }

    pub fn prefer(&self) -> f64 {
        self.prefer
    }

    pub fn disprefer(&self) -> f64 {
        self.disprefer
    }

    pub fn tie(&self) -> f64 {
        self.tie
    }

    pub fn sum(&self) -> f64 {
        self.prefer + self.disprefer + self.tie
    }
}

/// P(first beats second) = l1 / (l1 + l2).
pub fn bt_prob(s1: Strength, s2: Strength) -> f64 {
    s1.value() / (s1.value() + s2.value())
}

/// Ternary rank probabilities for two strengths under tie buffer `tp`.
pub fn tobt_probs(s1: Strength, s2: Strength, tp: &TieParam) -> RankProbabilities {
    rank_probs_from_margin(s1.ln() - s2.ln(), tp)
}

/// Same model with strengths given as rewards, l_i = exp(r_i).
///
/// Works entirely in log space, so it is exact for any finite rewards: only
/// the difference r1 - r2 enters, never exp(r_i) itself.
pub fn tobt_probs_from_rewards(r1: f64, r2: f64, tp: &TieParam) -> RankProbabilities {
    debug_assert!(r1.is_finite() && r2.is_finite());
    rank_probs_from_margin(r1 - r2, tp)
}

/// Shared kernel: the distribution depends on the pair only through the
/// log-strength (equivalently reward) difference `d`.
pub(crate) fn rank_probs_from_margin(d: f64, tp: &TieParam) -> RankProbabilities {
    let a = tp.alpha();
    let prefer = sigmoid(d - a);
    let disprefer = sigmoid(-d - a);
    let tie = if a == 0.0 {
        // phi^2 - 1 = 0: the tie interval has zero width.
        0.0
    } else {
        // tie = (e^{2a} - 1) / ((1 + e^{d+a})(1 + e^{-d+a})), in log space.
        // The softplus pair is summed before subtracting so the expression is
        // exactly symmetric in d.
        (log_expm1(2.0 * a) - (softplus(d + a) + softplus(-d + a))).exp()
    };
    RankProbabilities::new_unchecked(prefer, disprefer, tie)
}
