//! Replicated simulation scenarios: generate cohorts, fit every requested
//! estimator, score out-of-sample accuracy, aggregate across replications,
//! and pair the empirical means with the matching theory values.

pub mod report;

use rayon::prelude::*;
use std::sync::Arc;
use std::time::Instant;

use crate::datagen::{
    gen_architecture, gen_design, gen_trait, stream_rng, Cohort, CohortRole, DesignMode,
    SigmaMode, StreamKind,
};
use crate::estimators::{
    self, BasisSelection, BlpcBasis, CovSource, EstimatorKind, EstimatorOutput, Grouping, XtyNorm,
};
use crate::rmt::{
    self, a2_blpc, a2_block_ref, a2_block_ridge, a2_identity_closed_forms,
    a2_marginal_conditional, a2_ridge, optimal_lambda, AsymptoticPrediction, BlockEnsemble,
    FormulaId, PanelKind, PcFormula, RefInnerNorm,
};
use crate::spectrum::{build_block_covariance, BlockCovariance, BlockSpec};
use crate::{HdError, Result};

/// Minimum prediction norm below which accuracy is undefined.
const ZERO_PREDICTION_TOL: f64 = 1e-14;

/// How the penalty is chosen for an estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Fixed(f64),
    /// `omega (1 - h2) / h2` from the scenario's target heritability.
    OptimalStar,
    /// `c * q / n` with `q` the realized PC count (PC estimators only).
    ScaledQOverN { c: f64 },
}

/// Scenario-wide default penalty policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Fixed(f64),
    OptimalStar,
}

impl LambdaPolicy {
    fn as_rule(self) -> LambdaRule {
        match self {
            LambdaPolicy::Fixed(v) => LambdaRule::Fixed(v),
            LambdaPolicy::OptimalStar => LambdaRule::OptimalStar,
        }
    }
}

/// Column grouping choice for block-wise estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupingSpec {
    /// The covariance block boundaries.
    Blocks,
    /// One group over all columns.
    Single,
    /// Consecutive blocks merged into this many coarser groups.
    MergedInto(usize),
}

impl GroupingSpec {
    fn resolve(&self, cov: &BlockCovariance) -> Result<Grouping> {
        match self {
            GroupingSpec::Blocks => Grouping::from_boundaries(&cov.block_sizes()),
            GroupingSpec::Single => Ok(Grouping::single(cov.total_dim())),
            GroupingSpec::MergedInto(k) => Grouping::merge_blocks(&cov.block_sizes(), *k),
        }
    }
}

/// One estimator to run in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// `None` falls back to the scenario policy.
    pub lambda: Option<LambdaRule>,
    /// Covariance source for reference estimators; ignored otherwise.
    pub cov_source: Option<CovSource>,
    pub grouping: GroupingSpec,
    /// PC selection for the PC-space estimators.
    pub selection: Option<BasisSelection>,
    /// Stable column label; defaults per kind and source.
    pub label: Option<String>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorSpec {
            kind,
            lambda: None,
            cov_source: None,
            grouping: GroupingSpec::Blocks,
            selection: None,
            label: None,
        }
    }

    pub fn with_lambda(mut self, rule: LambdaRule) -> Self {
        self.lambda = Some(rule);
        self
    }

    pub fn with_source(mut self, source: CovSource) -> Self {
        self.cov_source = Some(source);
        self
    }

    pub fn with_grouping(mut self, grouping: GroupingSpec) -> Self {
        self.grouping = grouping;
        self
    }

    pub fn with_selection(mut self, selection: BasisSelection) -> Self {
        self.selection = Some(selection);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Default label, stable across runs.
    pub fn default_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match (self.kind, self.cov_source) {
            (EstimatorKind::Marginal, _) => "marginal".into(),
            (EstimatorKind::Ridge, _) => "ridge".into(),
            (EstimatorKind::BlockRidge, _) => "block_ridge".into(),
            (EstimatorKind::RefRidge, Some(CovSource::TestZ)) => "ridge_z".into(),
            (EstimatorKind::RefRidge, _) => "ridge_w".into(),
            (EstimatorKind::BlockRefRidge, Some(CovSource::TestZ)) => "block_ridge_z".into(),
            (EstimatorKind::BlockRefRidge, _) => "block_ridge_w".into(),
            (EstimatorKind::BlpcMarginal, _) => "blpc_marginal".into(),
            (EstimatorKind::BlpcBlockRidge, _) => "blpc_block_ridge".into(),
        }
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub cov_specs: Vec<BlockSpec>,
    /// Covariance of the external panel when it differs from the training
    /// one (mismatch experiments). Block sizes must match.
    pub panel_cov_specs: Option<Vec<BlockSpec>>,
    pub n: usize,
    pub n_w: usize,
    pub n_z: usize,
    pub h2: f64,
    /// Causal fraction m / p in (0, 1].
    pub sparsity: f64,
    pub effect_mode: SigmaMode,
    pub design_mode: DesignMode,
    pub estimators: Vec<EstimatorSpec>,
    pub lambda_policy: LambdaPolicy,
    pub replications: usize,
    pub base_seed: u64,
    /// Summary-statistic normalization in reference estimators.
    pub xty_norm_panel: bool,
    /// Inner sample count of the panel-branch theory correction.
    pub ref_inner_n: RefInnerNorm,
}

impl Scenario {
    pub fn p(&self) -> usize {
        self.cov_specs.iter().map(BlockSpec::size).sum()
    }

    pub fn causal_count(&self) -> usize {
        let p = self.p();
        ((self.sparsity * p as f64).round() as usize).clamp(1, p)
    }

    pub fn omega(&self) -> f64 {
        self.p() as f64 / self.n as f64
    }

    /// Checks every invariant; returns the full list of violations.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.cov_specs.is_empty() {
            problems.push("no covariance blocks".to_string());
        }
        if self.n < 3 || self.n_w < 3 || self.n_z < 3 {
            problems.push(format!(
                "sample counts must be >= 3 (n={}, n_w={}, n_z={})",
                self.n, self.n_w, self.n_z
            ));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            problems.push(format!("sparsity {} outside (0, 1]", self.sparsity));
        }
        if !(self.h2 > 0.0 && self.h2 < 1.0) {
            problems.push(format!("h2 {} outside (0, 1)", self.h2));
        }
        if self.replications == 0 {
            problems.push("at least one replication required".to_string());
        }
        if self.estimators.is_empty() {
            problems.push("no estimators requested".to_string());
        }
        if let Some(panel) = &self.panel_cov_specs {
            let train_sizes: Vec<usize> = self.cov_specs.iter().map(BlockSpec::size).collect();
            let panel_sizes: Vec<usize> = panel.iter().map(BlockSpec::size).collect();
            if train_sizes != panel_sizes {
                problems.push(format!(
                    "panel covariance block sizes {panel_sizes:?} differ from training {train_sizes:?}"
                ));
            }
        }
        let mut labels: Vec<String> =
            self.estimators.iter().map(EstimatorSpec::default_label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.estimators.len() {
            problems.push("estimator labels are not unique; set explicit labels".to_string());
        }
        for spec in &self.estimators {
            match spec.kind {
                EstimatorKind::RefRidge | EstimatorKind::BlockRefRidge => {
                    if spec.cov_source.is_none() || spec.cov_source == Some(CovSource::TrainX) {
                        // TrainX reference degenerates to the plain versions;
                        // allowed, used by equivalence tests
                    }
                }
                EstimatorKind::BlpcMarginal | EstimatorKind::BlpcBlockRidge => {
                    if spec.selection.is_none() {
                        problems.push(format!(
                            "{}: PC estimators need a basis selection",
                            spec.default_label()
                        ));
                    }
                }
                _ => {}
            }
            if let Some(LambdaRule::Fixed(v)) = spec.lambda {
                let needs_positive = matches!(
                    spec.kind,
                    EstimatorKind::Ridge
                        | EstimatorKind::BlockRidge
                        | EstimatorKind::RefRidge
                        | EstimatorKind::BlockRefRidge
                );
                if needs_positive && v <= 0.0 {
                    problems.push(format!(
                        "{}: ridge penalty must be positive",
                        spec.default_label()
                    ));
                }
                if spec.kind == EstimatorKind::BlpcBlockRidge && v < 0.0 {
                    problems.push(format!(
                        "{}: PC ridge penalty must be nonnegative",
                        spec.default_label()
                    ));
                }
            }
            if let Some(LambdaRule::ScaledQOverN { .. }) = spec.lambda {
                if !spec.kind.is_pc_space() {
                    problems.push(format!(
                        "{}: q/n penalties only apply to PC estimators",
                        spec.default_label()
                    ));
                }
            }
        }
        if let LambdaPolicy::Fixed(v) = self.lambda_policy {
            if v <= 0.0 {
                problems.push("scenario penalty must be positive".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HdError::InvalidParameter(problems.join("; ")))
        }
    }
}

/// Accuracy of one estimator in one replication.
#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub rep_index: usize,
    /// Per-estimator empirical accuracy, in scenario estimator order.
    pub a2: Vec<f64>,
    /// Penalties actually used, matching `a2`.
    pub lambdas: Vec<f64>,
    pub realized_h2: f64,
    pub wall_seconds: f64,
}

/// Aggregated accuracy of one estimator across replications.
#[derive(Debug, Clone)]
pub struct EstimatorSummary {
    pub label: String,
    pub kind: EstimatorKind,
    /// Penalty of the first replication (penalties are constant across
    /// replications except for realized-q PC rules).
    pub lambda: f64,
    pub mean: f64,
    pub sd: f64,
    pub mc_se: f64,
    pub theory: Option<f64>,
    pub gap: Option<f64>,
    pub formula: Option<FormulaId>,
    /// Whether the theory value is conditional on replication 0's design.
    pub conditional_theory: bool,
}

/// Scenario-level aggregation plus the raw replication table.
#[derive(Debug, Clone)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub estimators: Vec<EstimatorSummary>,
    pub replications: Vec<ReplicationResult>,
    pub mean_realized_h2: f64,
    /// Effects are redrawn every replication (full re-simulation).
    pub beta_redrawn_per_replication: bool,
}

/// Squared cosine between the testing trait and a prediction.
pub fn a2_from_prediction(
    y_z: &nalgebra::DVector<f64>,
    prediction: &nalgebra::DVector<f64>,
) -> Result<f64> {
    if y_z.len() != prediction.len() {
        return Err(HdError::DimensionMismatch(format!(
            "trait has length {}, prediction {}",
            y_z.len(),
            prediction.len()
        )));
    }
    let pred_norm = prediction.norm();
    if pred_norm < ZERO_PREDICTION_TOL {
        return Err(HdError::ZeroPrediction);
    }
    let dot = y_z.dot(prediction);
    Ok(dot * dot / (y_z.norm_squared() * pred_norm * pred_norm))
}

/// Out-of-sample accuracy of a fitted estimator on a testing cohort.
pub fn out_of_sample_a2(
    z: &Cohort,
    y_z: &nalgebra::DVector<f64>,
    est: &EstimatorOutput,
) -> Result<f64> {
    let prediction = est.predict(z)?;
    a2_from_prediction(y_z, &prediction)
}

struct ScenarioContext {
    cov: BlockCovariance,
    panel_cov: Option<BlockCovariance>,
    needs_w: bool,
    m: usize,
}

impl ScenarioContext {
    fn build(s: &Scenario) -> Result<Self> {
        let cov = build_block_covariance(&s.cov_specs)?;
        let panel_cov = match &s.panel_cov_specs {
            Some(specs) => Some(build_block_covariance(specs)?),
            None => None,
        };
        let needs_w = s.estimators.iter().any(|e| {
            matches!(e.kind, EstimatorKind::RefRidge | EstimatorKind::BlockRefRidge)
                && e.cov_source == Some(CovSource::PanelW)
        });
        Ok(ScenarioContext { cov, panel_cov, needs_w, m: s.causal_count() })
    }
}

fn resolve_lambda(
    spec: &EstimatorSpec,
    policy: LambdaPolicy,
    h2: f64,
    omega: f64,
    q: Option<usize>,
    n: usize,
) -> Result<f64> {
    let rule = spec.lambda.unwrap_or_else(|| policy.as_rule());
    match rule {
        LambdaRule::Fixed(v) => Ok(v),
        LambdaRule::OptimalStar => Ok(optimal_lambda(h2, omega)),
        LambdaRule::ScaledQOverN { c } => {
            let q = q.ok_or_else(|| {
                HdError::InvalidParameter(
                    "q/n penalty requested for an estimator without a PC basis".into(),
                )
            })?;
            Ok(c * q as f64 / n as f64)
        }
    }
}

fn fit_estimator(
    spec: &EstimatorSpec,
    s: &Scenario,
    ctx: &ScenarioContext,
    x: &Cohort,
    y: &nalgebra::DVector<f64>,
    w: Option<&Cohort>,
    z: &Cohort,
    xty: &nalgebra::DVector<f64>,
) -> Result<(EstimatorOutput, f64)> {
    let omega = s.omega();
    let grouping = spec.grouping.resolve(&ctx.cov)?;
    match spec.kind {
        EstimatorKind::Marginal => Ok((estimators::marginal(x, y)?, 0.0)),
        EstimatorKind::Ridge => {
            let lambda = resolve_lambda(spec, s.lambda_policy, s.h2, omega, None, s.n)?;
            Ok((estimators::ridge(x, y, lambda)?, lambda))
        }
        EstimatorKind::BlockRidge => {
            let lambda = resolve_lambda(spec, s.lambda_policy, s.h2, omega, None, s.n)?;
            Ok((estimators::block_ridge(x, y, lambda, &grouping)?, lambda))
        }
        EstimatorKind::RefRidge | EstimatorKind::BlockRefRidge => {
            let lambda = resolve_lambda(spec, s.lambda_policy, s.h2, omega, None, s.n)?;
            let reference = match spec.cov_source.unwrap_or(CovSource::PanelW) {
                CovSource::TrainX => x,
                CovSource::PanelW => w.ok_or_else(|| {
                    HdError::InvalidParameter("panel cohort missing for a W estimator".into())
                })?,
                CovSource::TestZ => z,
            };
            let norm = if s.xty_norm_panel {
                XtyNorm::Panel
            } else {
                XtyNorm::Training { n: s.n }
            };
            let out = if spec.kind == EstimatorKind::RefRidge {
                estimators::ref_ridge(xty, reference, lambda, norm)?
            } else {
                estimators::block_ref_ridge(xty, reference, lambda, &grouping, norm)?
            };
            Ok((out, lambda))
        }
        EstimatorKind::BlpcMarginal | EstimatorKind::BlpcBlockRidge => {
            let selection = spec.selection.as_ref().ok_or_else(|| {
                HdError::InvalidParameter("PC estimator without a basis selection".into())
            })?;
            let basis = Arc::new(estimators::fit_blpc_basis(x, &grouping, selection)?);
            let q = basis.total_components();
            if spec.kind == EstimatorKind::BlpcMarginal {
                Ok((estimators::blpc_marginal(x, y, &basis)?, 0.0))
            } else {
                let lambda =
                    resolve_lambda(spec, s.lambda_policy, s.h2, omega, Some(q), s.n)?;
                Ok((estimators::blpc_block_ridge(x, y, &basis, lambda)?, lambda))
            }
        }
    }
}

fn run_replication(
    s: &Scenario,
    ctx: &ScenarioContext,
    rep: usize,
) -> Result<ReplicationResult> {
    let start = Instant::now();
    let seed = s.base_seed;
    let tag = |role: &str| format!("seed={seed}/rep={rep}/{role}");
    let rep_u64 = rep as u64;

    let mut rng_x = stream_rng(seed, rep_u64, StreamKind::Design(CohortRole::Training));
    let x = gen_design(s.n, &ctx.cov, s.design_mode, CohortRole::Training, &mut rng_x,
                       tag("train"))?;
    let mut rng_a = stream_rng(seed, rep_u64, StreamKind::Architecture);
    let arch =
        gen_architecture(ctx.cov.total_dim(), ctx.m, s.effect_mode.clone(), s.h2, &mut rng_a)?;
    let mut rng_e = stream_rng(seed, rep_u64, StreamKind::Noise(CohortRole::Training));
    let train_trait = gen_trait(&x, &arch, &mut rng_e)?;

    let mut rng_z = stream_rng(seed, rep_u64, StreamKind::Design(CohortRole::Testing));
    let z = gen_design(s.n_z, &ctx.cov, s.design_mode, CohortRole::Testing, &mut rng_z,
                       tag("test"))?;
    let mut rng_ez = stream_rng(seed, rep_u64, StreamKind::Noise(CohortRole::Testing));
    let test_trait = gen_trait(&z, &arch, &mut rng_ez)?;

    let w = if ctx.needs_w {
        let mut rng_w = stream_rng(seed, rep_u64, StreamKind::Design(CohortRole::Panel));
        let wcov = ctx.panel_cov.as_ref().unwrap_or(&ctx.cov);
        Some(gen_design(s.n_w, wcov, s.design_mode, CohortRole::Panel, &mut rng_w, tag("panel"))?)
    } else {
        None
    };

    let xty = x.design.transpose() * &train_trait.y;

    let mut a2 = Vec::with_capacity(s.estimators.len());
    let mut lambdas = Vec::with_capacity(s.estimators.len());
    for spec in &s.estimators {
        let (fit, lambda) =
            fit_estimator(spec, s, ctx, &x, &train_trait.y, w.as_ref(), &z, &xty)?;
        let value = out_of_sample_a2(&z, &test_trait.y, &fit)?;
        a2.push(value);
        lambdas.push(lambda);
    }

    Ok(ReplicationResult {
        rep_index: rep,
        a2,
        lambdas,
        realized_h2: train_trait.realized_h2,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn theory_for(
    spec: &EstimatorSpec,
    s: &Scenario,
    ctx: &ScenarioContext,
    rep0: &ReplicationResult,
) -> Result<Option<(AsymptoticPrediction, bool)>> {
    let omega = s.omega();
    let p = ctx.cov.total_dim() as f64;
    let omega_w = p / s.n_w as f64;
    let omega_z = p / s.n_z as f64;
    let identity = ctx.cov.is_identity();
    let est_index = s
        .estimators
        .iter()
        .position(|e| std::ptr::eq(e, spec))
        .expect("spec belongs to scenario");
    let lambda = rep0.lambdas[est_index];

    let value = match spec.kind {
        EstimatorKind::Marginal => {
            if identity {
                let forms = a2_identity_closed_forms(s.h2, omega, omega_w, omega_z, 1.0)?;
                Some((forms.marginal, false))
            } else {
                // conditional on replication 0's design
                let x0 = regenerate_training(s, ctx, 0)?;
                Some((a2_marginal_conditional(s.h2, omega, &x0, &ctx.cov)?, true))
            }
        }
        EstimatorKind::Ridge => {
            let star = optimal_lambda(s.h2, omega);
            if (lambda - star).abs() <= 1e-9 * star.max(1.0) {
                let pooled = rmt::covariance_pooled_law(&ctx.cov)?;
                Some((a2_ridge(s.h2, omega, &pooled, star)?, false))
            } else if identity {
                let forms = a2_identity_closed_forms(s.h2, omega, omega_w, omega_z, lambda)?;
                Some((forms.ridge, false))
            } else {
                None
            }
        }
        EstimatorKind::BlockRidge => {
            let grouping = spec.grouping.resolve(&ctx.cov)?;
            let ens = BlockEnsemble::from_covariance_grouped(&ctx.cov, &grouping)?;
            Some((a2_block_ridge(s.h2, &ens, omega, lambda)?, false))
        }
        EstimatorKind::BlockRefRidge => {
            let source = spec.cov_source.unwrap_or(CovSource::PanelW);
            let mismatched = ctx.panel_cov.is_some()
                && s.panel_cov_specs.as_deref() != Some(s.cov_specs.as_slice());
            if source == CovSource::PanelW && mismatched {
                // no mismatch theory
                None
            } else {
                let grouping = spec.grouping.resolve(&ctx.cov)?;
                let ens = BlockEnsemble::from_covariance_grouped(&ctx.cov, &grouping)?;
                let panel = match source {
                    CovSource::PanelW => PanelKind::W { omega_w },
                    CovSource::TestZ => PanelKind::Z { omega_z },
                    CovSource::TrainX => PanelKind::W { omega_w: omega },
                };
                Some((
                    a2_block_ref(s.h2, &ens, omega, lambda, panel, s.ref_inner_n)?,
                    false,
                ))
            }
        }
        EstimatorKind::RefRidge => {
            let source = spec.cov_source.unwrap_or(CovSource::PanelW);
            let mismatched = ctx.panel_cov.is_some()
                && s.panel_cov_specs.as_deref() != Some(s.cov_specs.as_slice());
            if identity && (source != CovSource::PanelW || !mismatched) {
                let forms = a2_identity_closed_forms(s.h2, omega, omega_w, omega_z, lambda)?;
                let pick = match source {
                    CovSource::TestZ => forms.ref_z,
                    _ => forms.ref_w,
                };
                Some((pick, false))
            } else {
                None
            }
        }
        EstimatorKind::BlpcMarginal | EstimatorKind::BlpcBlockRidge => {
            let selection = spec.selection.as_ref().ok_or_else(|| {
                HdError::InvalidParameter("PC estimator without a basis selection".into())
            })?;
            let grouping = spec.grouping.resolve(&ctx.cov)?;
            let x0 = regenerate_training(s, ctx, 0)?;
            let basis: BlpcBasis = estimators::fit_blpc_basis(&x0, &grouping, selection)?;
            let traces = rmt::blpc_traces(&x0, &ctx.cov, &basis, lambda.max(0.0))?;
            let which = if spec.kind == EstimatorKind::BlpcMarginal {
                PcFormula::MarginalPc
            } else {
                PcFormula::RidgePc
            };
            Some((a2_blpc(s.h2, omega, &traces, which)?, true))
        }
    };
    Ok(value)
}

fn regenerate_training(s: &Scenario, ctx: &ScenarioContext, rep: usize) -> Result<Cohort> {
    let mut rng = stream_rng(s.base_seed, rep as u64, StreamKind::Design(CohortRole::Training));
    gen_design(
        s.n,
        &ctx.cov,
        s.design_mode,
        CohortRole::Training,
        &mut rng,
        format!("seed={}/rep={rep}/train", s.base_seed),
    )
}

/// Runs every replication of a scenario (concurrently, on disjoint RNG
/// streams) and aggregates. A failed replication aborts the scenario.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioSummary> {
    s.validate()?;
    let ctx = ScenarioContext::build(s)?;

    let results: Vec<Result<ReplicationResult>> = (0..s.replications)
        .into_par_iter()
        .map(|rep| run_replication(s, &ctx, rep))
        .collect();
    let replications = results.into_iter().collect::<Result<Vec<_>>>()?;

    let r = s.replications as f64;
    let mut estimators_summary = Vec::with_capacity(s.estimators.len());
    for (i, spec) in s.estimators.iter().enumerate() {
        let values: Vec<f64> = replications.iter().map(|rep| rep.a2[i]).collect();
        let mean = values.iter().sum::<f64>() / r;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        let mc_se = sd / r.sqrt();
        let theory = theory_for(spec, s, &ctx, &replications[0])?;
        let (theory_a2, formula, conditional) = match &theory {
            Some((pred, cond)) => (Some(pred.a2), Some(pred.formula), *cond),
            None => (None, None, false),
        };
        estimators_summary.push(EstimatorSummary {
            label: spec.default_label(),
            kind: spec.kind,
            lambda: replications[0].lambdas[i],
            mean,
            sd,
            mc_se,
            theory: theory_a2,
            gap: theory_a2.map(|t| (mean - t).abs()),
            formula,
            conditional_theory: conditional,
        });
    }
    let mean_realized_h2 =
        replications.iter().map(|rep| rep.realized_h2).sum::<f64>() / r;
    Ok(ScenarioSummary {
        scenario_id: s.id.clone(),
        estimators: estimators_summary,
        replications,
        mean_realized_h2,
        beta_redrawn_per_replication: true,
    })
}

/// Grid axes for sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Vary p/n by adjusting the training sample count.
    OmegaGrid(Vec<f64>),
    H2Grid(Vec<f64>),
    LambdaGrid(Vec<f64>),
    PanelSizeGrid(Vec<usize>),
    /// Vary the panel's within-block correlation (mismatch experiments).
    PanelRhoGrid(Vec<f64>),
}

impl SweepAxis {
    fn is_empty(&self) -> bool {
        match self {
            SweepAxis::OmegaGrid(v) | SweepAxis::H2Grid(v) | SweepAxis::LambdaGrid(v)
            | SweepAxis::PanelRhoGrid(v) => v.is_empty(),
            SweepAxis::PanelSizeGrid(v) => v.is_empty(),
        }
    }
}

fn respec_rho(specs: &[BlockSpec], rho: f64) -> Result<Vec<BlockSpec>> {
    specs
        .iter()
        .map(|spec| match spec {
            BlockSpec::Ar1 { size, .. } => Ok(BlockSpec::Ar1 { rho, size: *size }),
            BlockSpec::Equicorrelated { size, .. } => {
                Ok(BlockSpec::Equicorrelated { rho, size: *size })
            }
            BlockSpec::CustomDense(_) => Err(HdError::InvalidParameter(
                "cannot re-parameterize a custom block by rho".into(),
            )),
        })
        .collect()
}

/// Runs the base scenario across one grid axis, one summary per point.
pub fn sweep(axis: &SweepAxis, base: &Scenario) -> Result<Vec<ScenarioSummary>> {
    if axis.is_empty() {
        return Err(HdError::InvalidParameter("empty sweep grid".into()));
    }
    let mut out = Vec::new();
    match axis {
        SweepAxis::OmegaGrid(values) => {
            let p = base.p() as f64;
            for &omega in values {
                if omega <= 0.0 {
                    return Err(HdError::InvalidParameter("omega must be positive".into()));
                }
                let mut s = base.clone();
                s.n = ((p / omega).round() as usize).max(3);
                s.id = format!("{}_omega_{omega}", base.id);
                out.push(run_scenario(&s)?);
            }
        }
        SweepAxis::H2Grid(values) => {
            for &h2 in values {
                let mut s = base.clone();
                s.h2 = h2;
                s.id = format!("{}_h2_{h2}", base.id);
                out.push(run_scenario(&s)?);
            }
        }
        SweepAxis::LambdaGrid(values) => {
            for &lambda in values {
                let mut s = base.clone();
                s.lambda_policy = LambdaPolicy::Fixed(lambda);
                s.id = format!("{}_lambda_{lambda}", base.id);
                out.push(run_scenario(&s)?);
            }
        }
        SweepAxis::PanelSizeGrid(values) => {
            for &n_w in values {
                let mut s = base.clone();
                s.n_w = n_w;
                s.id = format!("{}_nw_{n_w}", base.id);
                out.push(run_scenario(&s)?);
            }
        }
        SweepAxis::PanelRhoGrid(values) => {
            for &rho in values {
                let mut s = base.clone();
                s.panel_cov_specs = Some(respec_rho(&base.cov_specs, rho)?);
                s.id = format!("{}_panelrho_{rho}", base.id);
                out.push(run_scenario(&s)?);
            }
        }
    }
    Ok(out)
}
