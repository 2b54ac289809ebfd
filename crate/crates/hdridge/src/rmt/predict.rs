//! Out-of-sample accuracy formulas assembled from companion solutions and
//! trace functionals.

use std::collections::BTreeMap;

use super::companion::solve_companion;
use super::traces::{r_traces, ref_panel_traces, PTraces};
use super::BlockEnsemble;
use crate::datagen::Cohort;
use crate::spectrum::{BlockCovariance, SpectralLaw};
use crate::{HdError, Result};

const DENOM_GUARD: f64 = 1e-14;

/// Which formula produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormulaId {
    BlockRidge,
    BlockRidgeOptimal,
    Ridge,
    BlockRefW,
    BlockRefZ,
    IdentityMarginal,
    IdentityRidge,
    IdentityRefW,
    IdentityRefZ,
    PcMarginal,
    PcRidge,
    MarginalConditional,
}

impl FormulaId {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaId::BlockRidge => "block_ridge",
            FormulaId::BlockRidgeOptimal => "block_ridge_optimal",
            FormulaId::Ridge => "ridge",
            FormulaId::BlockRefW => "block_ref_w",
            FormulaId::BlockRefZ => "block_ref_z",
            FormulaId::IdentityMarginal => "identity_marginal",
            FormulaId::IdentityRidge => "identity_ridge",
            FormulaId::IdentityRefW => "identity_ref_w",
            FormulaId::IdentityRefZ => "identity_ref_z",
            FormulaId::PcMarginal => "pc_marginal",
            FormulaId::PcRidge => "pc_ridge",
            FormulaId::MarginalConditional => "marginal_trace",
        }
    }
}

impl std::fmt::Display for FormulaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An accuracy prediction with every intermediate quantity the formula
/// consumed, keyed by name for inspection and export.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticPrediction {
    pub a2: f64,
    pub lambda: f64,
    pub formula: FormulaId,
    pub intermediates: BTreeMap<&'static str, f64>,
}

impl AsymptoticPrediction {
    pub fn intermediate(&self, key: &str) -> Option<f64> {
        self.intermediates.get(key).copied()
    }
}

/// The accuracy-optimal penalty `omega (1 - h2) / h2`.
pub fn optimal_lambda(h2: f64, omega: f64) -> f64 {
    omega * (1.0 - h2) / h2
}

fn check_h2(h2: f64) -> Result<()> {
    if !(h2 > 0.0 && h2 < 1.0) {
        return Err(HdError::InvalidParameter(format!("h2 = {h2} outside (0, 1)")));
    }
    Ok(())
}

fn block_pairs<'a>(ens: &'a BlockEnsemble, omega: f64) -> Vec<(f64, &'a SpectralLaw)> {
    ens.fracs()
        .iter()
        .zip(ens.laws())
        .map(|(&f, law)| (f * omega, law))
        .collect()
}

/// Block-wise ridge accuracy at a general penalty.
pub fn a2_block_ridge(
    h2: f64,
    ens: &BlockEnsemble,
    omega: f64,
    lambda: f64,
) -> Result<AsymptoticPrediction> {
    check_h2(h2)?;
    let blocks = block_pairs(ens, omega);
    let tr = r_traces(lambda, &blocks, omega)?;
    let num = (1.0 - lambda * tr.r1).powi(2) * h2 * h2;
    let den = (1.0 + lambda * lambda * tr.r2 - 2.0 * lambda * tr.r1 + tr.r3) * h2
        + (tr.r1 - lambda * tr.r2) * omega * (1.0 - h2);
    if den.abs() <= DENOM_GUARD {
        return Err(HdError::DivisionDegenerate(den));
    }
    let mut intermediates = BTreeMap::new();
    intermediates.insert("R1", tr.r1);
    intermediates.insert("R2", tr.r2);
    intermediates.insert("R3", tr.r3);
    Ok(AsymptoticPrediction { a2: num / den, lambda, formula: FormulaId::BlockRidge, intermediates })
}

/// Block-wise ridge accuracy at the optimal penalty, in the simplified form
/// where the squared-resolvent trace cancels.
pub fn a2_block_ridge_optimal(
    h2: f64,
    ens: &BlockEnsemble,
    omega: f64,
) -> Result<AsymptoticPrediction> {
    check_h2(h2)?;
    let lambda = optimal_lambda(h2, omega);
    let blocks = block_pairs(ens, omega);
    let tr = r_traces(lambda, &blocks, omega)?;
    let top = 1.0 - lambda * tr.r1;
    let den = top + tr.r3;
    if den.abs() <= DENOM_GUARD {
        return Err(HdError::DivisionDegenerate(den));
    }
    let mut intermediates = BTreeMap::new();
    intermediates.insert("R1", tr.r1);
    intermediates.insert("R2", tr.r2);
    intermediates.insert("R3", tr.r3);
    intermediates.insert("lambda_star", lambda);
    Ok(AsymptoticPrediction {
        a2: h2 * top * top / den,
        lambda,
        formula: FormulaId::BlockRidgeOptimal,
        intermediates,
    })
}

/// Whole-matrix ridge accuracy. The limit is stated at the optimal penalty
/// only; `lambda_star` must equal `omega (1 - h2) / h2`.
pub fn a2_ridge(
    h2: f64,
    omega: f64,
    full_law: &SpectralLaw,
    lambda_star: f64,
) -> Result<AsymptoticPrediction> {
    check_h2(h2)?;
    let expect = optimal_lambda(h2, omega);
    if (lambda_star - expect).abs() > 1e-9 * expect.max(1.0) {
        return Err(HdError::InvalidParameter(format!(
            "ridge accuracy is defined at the optimal penalty {expect}, got {lambda_star}"
        )));
    }
    let sol = solve_companion(omega, full_law, lambda_star)?;
    let r1 = full_law.expect(|t| t / (sol.a * t + lambda_star));
    let mut intermediates = BTreeMap::new();
    intermediates.insert("R1", r1);
    intermediates.insert("a_r", sol.a);
    intermediates.insert("lambda_star", lambda_star);
    Ok(AsymptoticPrediction {
        a2: h2 * (1.0 - lambda_star * r1),
        lambda: lambda_star,
        formula: FormulaId::Ridge,
        intermediates,
    })
}

/// Which cohort the reference covariance comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelKind {
    /// External panel with ratio `omega_w`.
    W { omega_w: f64 },
    /// Testing cohort with ratio `omega_z`.
    Z { omega_z: f64 },
}

/// Sample count used in the inner normalized traces of the panel-branch
/// correction factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefInnerNorm {
    /// The panel's own count (default; keeps the deterministic-equivalent
    /// scalar consistent with the companion root).
    Panel,
    /// The training count.
    Training,
}

impl Default for RefInnerNorm {
    fn default() -> Self {
        RefInnerNorm::Panel
    }
}

/// Accuracy of the block-wise reference-panel estimators.
pub fn a2_block_ref(
    h2: f64,
    ens: &BlockEnsemble,
    omega: f64,
    lambda: f64,
    panel: PanelKind,
    inner: RefInnerNorm,
) -> Result<AsymptoticPrediction> {
    check_h2(h2)?;
    if !(lambda > 0.0) {
        return Err(HdError::InvalidParameter("lambda must be positive".into()));
    }
    match panel {
        PanelKind::W { omega_w } => {
            let mut q1 = 0.0;
            let mut q2 = 0.0;
            let mut q3 = 0.0;
            for (&frac, law) in ens.fracs().iter().zip(ens.laws()) {
                let omega_ref_l = omega_w * frac;
                let omega_inner_l = match inner {
                    RefInnerNorm::Panel => omega_ref_l,
                    RefInnerNorm::Training => omega * frac,
                };
                let tr = ref_panel_traces(lambda, omega_ref_l, omega_inner_l, law)?;
                let a = tr.companion.a;
                q1 += frac * law.expect(|t| t * t / (a * t + lambda));
                q2 += frac * tr.sigma_sigma2;
                q3 += frac * tr.sigma_sigma;
            }
            let den = q2 * h2 + q3 * omega;
            if den.abs() <= DENOM_GUARD {
                return Err(HdError::DivisionDegenerate(den));
            }
            let mut intermediates = BTreeMap::new();
            intermediates.insert("Q1", q1);
            intermediates.insert("Q2", q2);
            intermediates.insert("Q3", q3);
            Ok(AsymptoticPrediction {
                a2: q1 * q1 * h2 * h2 / den,
                lambda,
                formula: FormulaId::BlockRefW,
                intermediates,
            })
        }
        PanelKind::Z { omega_z } => {
            let mut q4 = 0.0;
            let mut q5 = 0.0;
            let mut q6 = 0.0;
            let mut q7 = 0.0;
            for (&frac, law) in ens.fracs().iter().zip(ens.laws()) {
                let sol = solve_companion(omega_z * frac, law, lambda)?;
                let a = sol.a;
                let da = sol.a_dot;
                q4 += frac * law.expect(|t| t / (a * t + lambda));
                q5 += frac * law.expect(|t| t * t / (a * t + lambda));
                q6 += frac
                    * law.expect(|t| {
                        t * t * (1.0 + da * t) / ((a * t + lambda) * (a * t + lambda))
                    });
                q7 += frac
                    * law.expect(|t| t * (1.0 + da * t) / ((a * t + lambda) * (a * t + lambda)));
            }
            let den = (q5 - lambda * q6) * h2 + (q4 - lambda * q7) * omega;
            if den.abs() <= DENOM_GUARD {
                return Err(HdError::DivisionDegenerate(den));
            }
            let top = 1.0 - lambda * q4;
            let mut intermediates = BTreeMap::new();
            intermediates.insert("Q4", q4);
            intermediates.insert("Q5", q5);
            intermediates.insert("Q6", q6);
            intermediates.insert("Q7", q7);
            Ok(AsymptoticPrediction {
                a2: top * top * h2 * h2 / den,
                lambda,
                formula: FormulaId::BlockRefZ,
                intermediates,
            })
        }
    }
}

/// Closed-form accuracies for the unit covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityClosedForms {
    pub marginal: AsymptoticPrediction,
    pub ridge: AsymptoticPrediction,
    pub ref_w: AsymptoticPrediction,
    pub ref_z: AsymptoticPrediction,
}

/// The square-root companion of the unit-spectrum quadratic.
fn b_closed(lambda: f64, omega: f64) -> (f64, f64) {
    let base = lambda + omega - 1.0;
    let b = 0.5 * ((base * base + 4.0 * lambda).sqrt() - base);
    let b_dot = -(omega * b) / (omega * lambda + (b + lambda) * (b + lambda));
    (b, b_dot)
}

/// Closed forms for the marginal, ridge, and non-block reference ridges
/// when the covariance is the identity.
pub fn a2_identity_closed_forms(
    h2: f64,
    omega: f64,
    omega_w: f64,
    omega_z: f64,
    lambda: f64,
) -> Result<IdentityClosedForms> {
    check_h2(h2)?;
    if !(lambda > 0.0 && omega > 0.0 && omega_w > 0.0 && omega_z > 0.0) {
        return Err(HdError::InvalidParameter(
            "lambda and aspect ratios must be positive".into(),
        ));
    }
    let h4 = h2 * h2;
    let (b_w, b_dot_w) = b_closed(lambda, omega_w);
    let (b_z, _) = b_closed(lambda, omega_z);
    let (b_r, b_dot_r) = b_closed(lambda, omega);

    let marginal = AsymptoticPrediction {
        a2: h4 / (h2 + omega),
        lambda,
        formula: FormulaId::IdentityMarginal,
        intermediates: BTreeMap::new(),
    };

    let mut ridge_int = BTreeMap::new();
    ridge_int.insert("b_r", b_r);
    ridge_int.insert("b_dot_r", b_dot_r);
    let ridge_den = (b_r * b_r - lambda * lambda * b_dot_r) * h2
        + (b_r + lambda * b_dot_r) * omega * (1.0 - h2);
    if ridge_den.abs() <= DENOM_GUARD {
        return Err(HdError::DivisionDegenerate(ridge_den));
    }
    let ridge = AsymptoticPrediction {
        a2: h4 * b_r * b_r / ridge_den,
        lambda,
        formula: FormulaId::IdentityRidge,
        intermediates: ridge_int,
    };

    let mut rw_int = BTreeMap::new();
    rw_int.insert("b_w", b_w);
    rw_int.insert("b_dot_w", b_dot_w);
    let ref_w = AsymptoticPrediction {
        a2: h4 / (h2 + omega) / (1.0 - b_dot_w),
        lambda,
        formula: FormulaId::IdentityRefW,
        intermediates: rw_int,
    };

    let mut rz_int = BTreeMap::new();
    rz_int.insert("b_z", b_z);
    let ref_z = AsymptoticPrediction {
        a2: h4 / (h2 + omega) * (b_z * b_z + lambda) / (b_z + lambda),
        lambda,
        formula: FormulaId::IdentityRefZ,
        intermediates: rz_int,
    };

    Ok(IdentityClosedForms { marginal, ridge, ref_w, ref_z })
}

/// Which PC-space display to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcFormula {
    MarginalPc,
    RidgePc,
}

/// PC-space accuracy from the conditional traces.
pub fn a2_blpc(
    h2: f64,
    omega: f64,
    traces: &PTraces,
    which: PcFormula,
) -> Result<AsymptoticPrediction> {
    check_h2(h2)?;
    let (num_trace, den_a, den_b, formula, lambda) = match which {
        PcFormula::MarginalPc => (traces.p1, traces.p2, traces.p3, FormulaId::PcMarginal, 0.0),
        PcFormula::RidgePc => {
            (traces.p4, traces.p5, traces.p6, FormulaId::PcRidge, traces.lambda)
        }
    };
    let den = den_a * h2 + den_b * omega * (1.0 - h2);
    if den.abs() <= DENOM_GUARD {
        return Err(HdError::DivisionDegenerate(den));
    }
    let mut intermediates = BTreeMap::new();
    intermediates.insert("P1", traces.p1);
    intermediates.insert("P2", traces.p2);
    intermediates.insert("P3", traces.p3);
    intermediates.insert("P4", traces.p4);
    intermediates.insert("P5", traces.p5);
    intermediates.insert("P6", traces.p6);
    Ok(AsymptoticPrediction {
        a2: num_trace * num_trace * h2 * h2 / den,
        lambda,
        formula,
        intermediates,
    })
}

/// Conditional accuracy of the marginal estimator on a realized training
/// design: the full-basis special case of the PC-space display, with
/// `t1 = p^-1 tr(Sigma Shat)` and `t2 = p^-1 tr(Sigma Shat^2)`.
pub fn a2_marginal_conditional(
    h2: f64,
    omega: f64,
    x: &Cohort,
    cov: &BlockCovariance,
) -> Result<AsymptoticPrediction> {
    check_h2(h2)?;
    let p = cov.total_dim();
    if x.p() != p {
        return Err(HdError::DimensionMismatch(format!(
            "cohort has p = {}, covariance has {}",
            x.p(),
            p
        )));
    }
    let n = x.n as f64;
    let pf = p as f64;
    let shat = x.design.transpose() * &x.design / n;
    // M = Sigma Shat, applied block-row-wise
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for l in 0..cov.num_blocks() {
        let range = cov.block_range(l);
        let block = &cov.block(l)?.matrix;
        let rows = shat.rows(range.start, range.len());
        let m_rows = block * rows; // p_l x p
        for (i, row) in range.clone().enumerate() {
            t1 += m_rows[(i, row)];
            for j in 0..p {
                t2 += m_rows[(i, j)] * shat[(j, row)];
            }
        }
    }
    t1 /= pf;
    t2 /= pf;
    let den = t2 * h2 + t1 * omega * (1.0 - h2);
    if den.abs() <= DENOM_GUARD {
        return Err(HdError::DivisionDegenerate(den));
    }
    let mut intermediates = BTreeMap::new();
    intermediates.insert("P1", t1);
    intermediates.insert("P2", t2);
    intermediates.insert("P3", t1);
    Ok(AsymptoticPrediction {
        a2: t1 * t1 * h2 * h2 / den,
        lambda: 0.0,
        formula: FormulaId::MarginalConditional,
        intermediates,
    })
}
