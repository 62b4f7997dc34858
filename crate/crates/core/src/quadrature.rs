//! Adaptive-quadrature oracle for the integral form of the ranking model.
//!
//! The ternary masses have an equivalent definition as integrals of
//! (1/4) sech²(y/2): the prefer mass over [-d + alpha, inf), the tie mass over
//! [-d - alpha, -d + alpha], and the disprefer mass over the mirrored
//! half-line. Substituting t = y/2 gives (1/2) sech²(t) with antiderivative
//! tanh(t)/2. The oracle integrates the finite region numerically with
//! adaptive Simpson and takes the half-infinite tail past a fixed cutoff from
//! the antiderivative, so it never reuses the closed forms it is checking.

use thiserror::Error;

use crate::tobt::{LogStrengthDiff, ModelError, RankProbabilities, TieParam};

/// |t| beyond which sech²(t) < 1e-50; the tail past this point comes from the
/// antiderivative instead of the numeric rule.
const TAIL_CUTOFF: f64 = 60.0;
/// Tolerance driving the adaptive rule. The per-component accuracy budget is
/// 1e-10, but the three masses must also sum to 1 within the 1e-12
/// distribution invariant, so the recursion is pushed well below that.
const ABS_TOL: f64 = 1e-14;
/// |d| beyond which the integrand underflows; saturated values are returned.
const SATURATION_LIMIT: f64 = 50.0;
const MAX_DEPTH: u32 = 48;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    ToleranceNotReached { a: f64, b: f64, tol: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn sech_sq(t: f64) -> f64 {
    let c = t.cosh();
    if c.is_finite() {
        let s = 1.0 / c;
        s * s
    } else {
        0.0
    }
}

/// Numerically evaluates the three rank masses for log-strength gap `d`.
///
/// For |d| > 50 the integrand underflows everywhere that matters and the
/// saturated distribution is returned directly.
pub fn quadrature_oracle(
    d: LogStrengthDiff,
    tp: &TieParam,
) -> Result<RankProbabilities, QuadratureError> {
    let dv = d.value();
    if dv > SATURATION_LIMIT {
        return Ok(RankProbabilities::new(1.0, 0.0, 0.0)?);
    }
    if dv < -SATURATION_LIMIT {
        return Ok(RankProbabilities::new(0.0, 1.0, 0.0)?);
    }
    let a = tp.alpha();
    let t_prefer = (-dv + a) / 2.0;
    let t_tie_low = (-dv - a) / 2.0;
    let t_disprefer = (dv + a) / 2.0;

    let prefer = half_line_mass(t_prefer)?;
    let disprefer = half_line_mass(t_disprefer)?;
    // Zero-width interval when alpha = 0.
    let tie = 0.5 * adaptive_simpson(sech_sq, t_tie_low, t_prefer, ABS_TOL)?;
    Ok(RankProbabilities::new(prefer, disprefer, tie)?)
}

/// (1/2) ∫_t^inf sech²(u) du: numeric up to the cutoff, antiderivative beyond.
fn half_line_mass(t: f64) -> Result<f64, QuadratureError> {
    if t >= TAIL_CUTOFF {
        return Ok((1.0 - t.tanh()) / 2.0);
    }
    let tail = (1.0 - TAIL_CUTOFF.tanh()) / 2.0;
    Ok(0.5 * adaptive_simpson(sech_sq, t, TAIL_CUTOFF, ABS_TOL)? + tail)
}

/// Adaptive Simpson with the standard 15x acceptance test and Richardson
/// correction.
fn adaptive_simpson(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, QuadratureError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(QuadratureError::ToleranceNotReached { a, b, tol });
    }
    Ok(
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}
