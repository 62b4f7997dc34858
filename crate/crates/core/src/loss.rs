//! Alignment objectives over the implicit reward margin.
//!
//! Each operation returns the scalar loss together with its exact derivative
//! with respect to the margin; the chain rule through the policy's log-probs
//! lives in [`crate::policy`]. The losses are the negative logs of the ternary
//! rank masses in [`crate::tobt`], written in softplus/sigmoid form so they
//! stay finite for any representable margin:
//!
//! ```text
//! dpo:   -log sigmoid(mu)            = softplus(-mu)
//! pref:  -log sigmoid(mu - alpha)    = softplus(alpha - mu)
//! tie:   -log tie_mass(mu, alpha)    = softplus(mu+a) + softplus(-mu+a) - ln(e^{2a}-1)
//! ```

use thiserror::Error;

use crate::numeric::{log_expm1, sigmoid, softplus};
use crate::tobt::TieParam;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("margin must be finite, got {0}")]
    NonFiniteMargin(f64),
    #[error("tie loss is undefined for alpha = 0 (the tie mass is zero)")]
    DegenerateTieAlpha,
}

/// Implicit reward margin: the beta-scaled difference of policy-vs-reference
/// log-prob ratios for the two responses of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin(f64);

impl Margin {
    pub fn new(mu: f64) -> Result<Self, LossError> {
        if !mu.is_finite() {
            return Err(LossError::NonFiniteMargin(mu));
        }
        Ok(Self(mu))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Selects which branch of the mixed objective applies to a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TieIndicator {
    is_tie: bool,
}

impl TieIndicator {
    pub fn new(is_tie: bool) -> Self {
        Self { is_tie }
    }

    pub fn is_tie(self) -> bool {
        self.is_tie
    }
}

impl From<bool> for TieIndicator {
    fn from(is_tie: bool) -> Self {
        Self::new(is_tie)
    }
}

/// A loss value and its exact d(loss)/d(margin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub dloss_dmu: f64,
}

/// -log sigmoid(mu).
pub fn dpo_loss(m: Margin) -> LossGrad {
    let mu = m.value();
    LossGrad {
        loss: softplus(-mu),
        dloss_dmu: -sigmoid(-mu),
    }
}

/// -log sigmoid(mu - alpha); identical to `dpo_loss` at alpha = 0.
pub fn todo_pref_loss(m: Margin, tp: &TieParam) -> LossGrad {
    let shifted = tp.alpha() - m.value();
    LossGrad {
        loss: softplus(shifted),
        dloss_dmu: -sigmoid(shifted),
    }
}

/// Negative log of the tie mass. Requires alpha > 0: at alpha = 0 the mass is
/// identically zero and the logarithm has no value.
pub fn todo_tie_loss(m: Margin, tp: &TieParam) -> Result<LossGrad, LossError> {
    if tp.is_degenerate() {
        return Err(LossError::DegenerateTieAlpha);
    }
    let mu = m.value();
    let a = tp.alpha();
    // The softplus pair is summed first so the loss is exactly even in mu.
    let loss = (softplus(mu + a) + softplus(-mu + a)) - log_expm1(2.0 * a);
    let dloss_dmu = sigmoid(mu + a) - sigmoid(-mu + a);
    Ok(LossGrad { loss, dloss_dmu })
}

/// Mixed per-pair objective: the tie branch when the indicator is set, the
/// shifted preference branch otherwise.
pub fn todo_loss(m: Margin, ind: TieIndicator, tp: &TieParam) -> Result<LossGrad, LossError> {
    if ind.is_tie() {
        todo_tie_loss(m, tp)
    } else {
        Ok(todo_pref_loss(m, tp))
    }
}

/// Gradient weight G(mu) = sigmoid(alpha - mu) - sigmoid(alpha + mu) for tie
/// pairs: odd in mu, zero at mu = 0, strictly decreasing, and equal to the
/// negated derivative of `todo_tie_loss`.
pub fn g_weight(m: Margin, tp: &TieParam) -> f64 {
    let mu = m.value();
    let a = tp.alpha();
    sigmoid(a - mu) - sigmoid(a + mu)
}
