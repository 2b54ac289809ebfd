//! Asymptotic-theory engine: companion fixed points of the
//! Marchenko-Pastur equation, the trace functionals entering the accuracy
//! limits, and the out-of-sample accuracy formulas themselves.
//!
//! All spectral expectations are exact finite sums over block eigenvalues;
//! the empirical spectral distribution is the finite-p stand-in for the
//! limiting law.

mod companion;
mod predict;
mod traces;

pub use companion::{solve_companion, CompanionSolution};
pub use predict::{
    a2_block_ref, a2_block_ridge, a2_block_ridge_optimal, a2_blpc, a2_identity_closed_forms,
    a2_marginal_conditional, a2_ridge, optimal_lambda, AsymptoticPrediction, FormulaId,
    IdentityClosedForms, PanelKind, PcFormula, RefInnerNorm,
};
pub use traces::{
    blpc_traces, empirical_cross_block_traces, r_traces, ref_panel_traces, PTraces, RTraces,
    RefBlockTraces, CrossBlockTraces,
};

use crate::spectrum::{pooled_law, BlockCovariance, SpectralLaw};
use crate::{HdError, Result};

/// Dimension-to-sample-count ratios for one scenario.
///
/// `omega` is p/n for the training cohort; the optional panel and testing
/// ratios are p/n_w and p/n_z. Per-block ratios are the global ratio scaled
/// by the block's dimension fraction, so they stay sum-consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectRatios {
    pub omega: f64,
    pub omega_w: Option<f64>,
    pub omega_z: Option<f64>,
    /// Block dimension fractions p_l / p, summing to 1.
    pub block_fracs: Vec<f64>,
}

impl AspectRatios {
    pub fn new(
        block_sizes: &[usize],
        n: usize,
        n_w: Option<usize>,
        n_z: Option<usize>,
    ) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(HdError::DimensionMismatch("no blocks".into()));
        }
        if n == 0 || n_w == Some(0) || n_z == Some(0) {
            return Err(HdError::InvalidParameter("sample counts must be positive".into()));
        }
        let p: usize = block_sizes.iter().sum();
        let pf = p as f64;
        Ok(AspectRatios {
            omega: pf / n as f64,
            omega_w: n_w.map(|v| pf / v as f64),
            omega_z: n_z.map(|v| pf / v as f64),
            block_fracs: block_sizes.iter().map(|&s| s as f64 / pf).collect(),
        })
    }

    /// Per-block training ratios omega_l = omega * p_l/p.
    pub fn block_omegas(&self) -> Vec<f64> {
        self.block_fracs.iter().map(|f| f * self.omega).collect()
    }
}

/// Spectral laws of the (possibly merged) groups, with their dimension
/// fractions. This is what every accuracy formula consumes.
#[derive(Debug, Clone)]
pub struct BlockEnsemble {
    laws: Vec<SpectralLaw>,
    fracs: Vec<f64>,
    total_dim: usize,
}

impl BlockEnsemble {
    pub fn new(laws: Vec<SpectralLaw>, sizes: &[usize]) -> Result<Self> {
        if laws.len() != sizes.len() || laws.is_empty() {
            return Err(HdError::DimensionMismatch(format!(
                "{} laws for {} sizes",
                laws.len(),
                sizes.len()
            )));
        }
        for (law, &s) in laws.iter().zip(sizes) {
            if law.len() != s {
                return Err(HdError::DimensionMismatch(format!(
                    "law has {} atoms for a block of size {s}",
                    law.len()
                )));
            }
        }
        let p: usize = sizes.iter().sum();
        let fracs = sizes.iter().map(|&s| s as f64 / p as f64).collect();
        Ok(BlockEnsemble { laws, fracs, total_dim: p })
    }

    /// One entry per covariance block.
    pub fn from_covariance(cov: &BlockCovariance) -> Result<Self> {
        let laws = (0..cov.num_blocks())
            .map(|l| crate::spectrum::spectral_law(cov, l))
            .collect::<Result<Vec<_>>>()?;
        BlockEnsemble::new(laws, &cov.block_sizes())
    }

    /// Blocks merged into coarser groups: each group's law pools the member
    /// blocks' eigenvalues (a merged group is itself block-diagonal, so its
    /// spectrum is the union of its members').
    pub fn from_covariance_grouped(
        cov: &BlockCovariance,
        grouping: &crate::estimators::Grouping,
    ) -> Result<Self> {
        if grouping.total() != cov.total_dim() {
            return Err(HdError::DimensionMismatch(format!(
                "grouping covers {} columns, covariance has {}",
                grouping.total(),
                cov.total_dim()
            )));
        }
        let sizes = cov.block_sizes();
        let mut laws = Vec::with_capacity(grouping.num_groups());
        let mut block_idx = 0;
        for &gsize in grouping.sizes() {
            let mut eigs: Vec<f64> = Vec::with_capacity(gsize);
            let mut got = 0;
            while got < gsize {
                if block_idx >= sizes.len() {
                    return Err(HdError::BadGrouping(
                        "group boundaries do not align with covariance blocks".into(),
                    ));
                }
                if got + sizes[block_idx] > gsize {
                    return Err(HdError::BadGrouping(
                        "group boundaries split a covariance block".into(),
                    ));
                }
                eigs.extend(cov.block(block_idx)?.eigenvalues.iter().cloned());
                got += sizes[block_idx];
                block_idx += 1;
            }
            laws.push(SpectralLaw::new(eigs)?);
        }
        let group_sizes: Vec<usize> = grouping.sizes().to_vec();
        BlockEnsemble::new(laws, &group_sizes)
    }

    pub fn laws(&self) -> &[SpectralLaw] {
        &self.laws
    }

    pub fn fracs(&self) -> &[f64] {
        &self.fracs
    }

    pub fn num_blocks(&self) -> usize {
        self.laws.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// The pooled law of the whole matrix.
    pub fn pooled(&self) -> Result<SpectralLaw> {
        let mut all = Vec::with_capacity(self.total_dim);
        for law in &self.laws {
            all.extend_from_slice(law.eigenvalues());
        }
        SpectralLaw::new(all)
    }
}

/// Convenience: pooled law straight from a covariance.
pub fn covariance_pooled_law(cov: &BlockCovariance) -> Result<SpectralLaw> {
    pooled_law(cov)
}
