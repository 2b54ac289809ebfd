//! Companion fixed point of the Marchenko-Pastur equation for one block.

use crate::spectrum::SpectralLaw;
use crate::{HdError, Result};

/// Residual tolerance required of a returned solution.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Cross-check tolerance on the self-consistent Stieltjes equation.
pub const MP_RESIDUAL_TOL: f64 = 1e-8;
const MAX_ITER: usize = 200;
const BRACKET_LO: f64 = 1e-12;

/// Solution of `1 - a = omega * (1 - E[lambda / (a t + lambda)])` together
/// with the derived spectral quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionSolution {
    /// The unique root in (0, 1].
    pub a: f64,
    /// d a / d lambda (positive; the resolvent flattens as the penalty
    /// grows). Formula displays that subtract a dotted term with the
    /// opposite sign convention use `-a_dot`.
    pub a_dot: f64,
    /// Stieltjes transform of the sample-spectrum limit at -lambda:
    /// `E[1 / (a t + lambda)]`.
    pub m_neg_lambda: f64,
    /// Companion transform `omega (m - 1/lambda) + 1/lambda`; satisfies
    /// `lambda * v = a` up to the fixed-point residual.
    pub v_neg_lambda: f64,
    /// Absolute fixed-point residual at the returned root.
    pub residual: f64,
}

fn fixed_point_gap(a: f64, omega: f64, law: &SpectralLaw, lambda: f64) -> f64 {
    (1.0 - a) - omega * (1.0 - law.expect(|t| lambda / (a * t + lambda)))
}

/// Solves the companion fixed point by bisection on [1e-12, 1].
///
/// The gap function is strictly decreasing in `a`; the endpoints are checked
/// and a sign agreement is reported as `NoRoot` (it indicates invalid
/// inputs rather than a missing solution).
pub fn solve_companion(
    omega_l: f64,
    law: &SpectralLaw,
    lambda: f64,
) -> Result<CompanionSolution> {
    if !(omega_l > 0.0) || !omega_l.is_finite() {
        return Err(HdError::InvalidParameter(format!(
            "aspect ratio must be positive, got {omega_l}"
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(HdError::InvalidParameter(format!(
            "penalty must be positive, got {lambda}"
        )));
    }
    if law.is_empty() {
        return Err(HdError::DimensionMismatch("empty spectral law".into()));
    }
    let mut lo = BRACKET_LO;
    let mut hi = 1.0;
    let g_lo = fixed_point_gap(lo, omega_l, law, lambda);
    let g_hi = fixed_point_gap(hi, omega_l, law, lambda);
    if g_lo < 0.0 || g_hi > 0.0 {
        return Err(HdError::NoRoot(format!(
            "gap({lo:e}) = {g_lo:e}, gap(1) = {g_hi:e} for omega = {omega_l}, lambda = {lambda}"
        )));
    }
    let mut a = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        a = 0.5 * (lo + hi);
        let g = fixed_point_gap(a, omega_l, law, lambda);
        residual = g.abs();
        if residual <= RESIDUAL_TOL && (hi - lo) <= 1e-14 {
            break;
        }
        if g > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
    }
    if residual > RESIDUAL_TOL {
        return Err(HdError::ToleranceNotMet { residual, iterations: MAX_ITER });
    }

    let num = omega_l * law.expect(|t| a * t / ((a * t + lambda) * (a * t + lambda)));
    let den = 1.0 + omega_l * lambda * law.expect(|t| t / ((a * t + lambda) * (a * t + lambda)));
    let a_dot = num / den;

    let m = law.expect(|t| 1.0 / (a * t + lambda));
    let v = omega_l * (m - 1.0 / lambda) + 1.0 / lambda;

    // cross-check: m solves the self-consistent Stieltjes equation
    let a_from_m = 1.0 - omega_l + omega_l * lambda * m;
    let m_check = law.expect(|t| 1.0 / (t * a_from_m + lambda));
    let mp_residual = (m_check - m).abs();
    if mp_residual > MP_RESIDUAL_TOL {
        return Err(HdError::ToleranceNotMet { residual: mp_residual, iterations: MAX_ITER });
    }

    Ok(CompanionSolution { a, a_dot, m_neg_lambda: m, v_neg_lambda: v, residual })
}
