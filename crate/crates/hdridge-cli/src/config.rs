//! TOML configuration schema and its mapping onto scenario types.
//!
//! Parsing is strict: unknown keys are hard errors, and semantic validation
//! collects every violated invariant before any computation starts.

use serde::{Deserialize, Serialize};
use std::path::Path;

use hdridge::datagen::{DesignMode, SigmaMode};
use hdridge::estimators::{BasisSelection, CovSource, EstimatorKind};
use hdridge::harness::{
    EstimatorSpec, GroupingSpec, LambdaPolicy, LambdaRule, Scenario, SweepAxis,
};
use hdridge::rmt::RefInnerNorm;
use hdridge::spectrum::{read_block_csv, BlockSpec};

/// Output format of results and summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// The full, validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blpc: Option<BlpcToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overrides: Option<OverridesToml>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputToml {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesToml {
    /// "panel" (default) or "training".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xty_norm: Option<String>,
    /// "panel" (default) or "training".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_inner_n: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockToml {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

fn one() -> usize {
    1
}

#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_one(v: &usize) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaToml {
    Number(f64),
    Keyword(String),
    QOverN { q_over_n_scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupingToml {
    Keyword(String),
    Merged { merged: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorToml {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grouping: Option<GroupingToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_counts: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioToml {
    pub id: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_w: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_z: Option<usize>,
    pub h2: f64,
    pub sparsity: f64,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_beta_sq: Option<f64>,
    pub blocks: Vec<BlockToml>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel_blocks: Option<Vec<BlockToml>>,
    pub estimators: Vec<EstimatorToml>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepToml {
    /// "omega", "h2", "lambda", "panel_size", or "panel_rho".
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryToml {
    pub id: String,
    pub h2: Vec<f64>,
    pub omega: Vec<f64>,
    /// Fixed penalties; omit to evaluate at the optimal one per point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_w: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_z: Option<Vec<f64>>,
    /// Any of: "identity", "block_ridge", "ridge", "block_ref_w",
    /// "block_ref_z".
    pub formulas: Vec<String>,
    pub blocks: Vec<BlockToml>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlpcToml {
    pub id: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_z: Option<usize>,
    pub h2: f64,
    pub sparsity: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub taus: Vec<f64>,
    /// Penalty scale factors c for the q/n rule.
    pub c_grid: Vec<f64>,
    pub blocks: Vec<BlockToml>,
}

/// Parses a config file; unknown keys and type errors carry the TOML
/// position context.
pub fn parse_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> anyhow::Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("parse error: {e}"))?;
    Ok(cfg)
}

/// Canonical rendering; `parse(render(cfg)) == cfg` for every valid config.
pub fn render_config(cfg: &RunConfig) -> anyhow::Result<String> {
    Ok(toml::to_string(cfg)?)
}

pub fn blocks_from_toml(blocks: &[BlockToml], base: &Path) -> anyhow::Result<Vec<BlockSpec>> {
    let mut out = Vec::new();
    for b in blocks {
        let template = match b.kind.as_str() {
            "ar1" => {
                let rho = b.rho.ok_or_else(|| anyhow::anyhow!("ar1 block needs rho"))?;
                let size = b.size.ok_or_else(|| anyhow::anyhow!("ar1 block needs size"))?;
                BlockSpec::Ar1 { rho, size }
            }
            "equicorrelated" => {
                let rho =
                    b.rho.ok_or_else(|| anyhow::anyhow!("equicorrelated block needs rho"))?;
                let size =
                    b.size.ok_or_else(|| anyhow::anyhow!("equicorrelated block needs size"))?;
                BlockSpec::Equicorrelated { rho, size }
            }
            "identity" => {
                let size = b.size.ok_or_else(|| anyhow::anyhow!("identity block needs size"))?;
                BlockSpec::Ar1 { rho: 0.0, size }
            }
            "custom" => {
                let file =
                    b.file.as_ref().ok_or_else(|| anyhow::anyhow!("custom block needs file"))?;
                let path = base.join(file);
                read_block_csv(&path)?
            }
            other => anyhow::bail!("unknown block kind {other:?}"),
        };
        for _ in 0..b.count {
            out.push(template.clone());
        }
    }
    Ok(out)
}

fn lambda_rule(l: &LambdaToml) -> anyhow::Result<LambdaRule> {
    match l {
        LambdaToml::Number(v) => Ok(LambdaRule::Fixed(*v)),
        LambdaToml::Keyword(k) if k == "star" => Ok(LambdaRule::OptimalStar),
        LambdaToml::Keyword(k) => anyhow::bail!("unknown lambda keyword {k:?}, expected \"star\""),
        LambdaToml::QOverN { q_over_n_scale } => {
            Ok(LambdaRule::ScaledQOverN { c: *q_over_n_scale })
        }
    }
}

fn estimator_from_toml(e: &EstimatorToml) -> anyhow::Result<EstimatorSpec> {
    let (kind, source) = match e.kind.as_str() {
        "marginal" => (EstimatorKind::Marginal, None),
        "ridge" => (EstimatorKind::Ridge, None),
        "block_ridge" => (EstimatorKind::BlockRidge, None),
        "ridge_w" => (EstimatorKind::RefRidge, Some(CovSource::PanelW)),
        "ridge_z" => (EstimatorKind::RefRidge, Some(CovSource::TestZ)),
        "block_ridge_w" => (EstimatorKind::BlockRefRidge, Some(CovSource::PanelW)),
        "block_ridge_z" => (EstimatorKind::BlockRefRidge, Some(CovSource::TestZ)),
        "blpc_marginal" => (EstimatorKind::BlpcMarginal, None),
        "blpc_block_ridge" => (EstimatorKind::BlpcBlockRidge, None),
        other => anyhow::bail!("unknown estimator kind {other:?}"),
    };
    let mut spec = EstimatorSpec::new(kind);
    if let Some(source) = source {
        spec = spec.with_source(source);
    }
    if let Some(l) = &e.lambda {
        spec = spec.with_lambda(lambda_rule(l)?);
    }
    if let Some(g) = &e.grouping {
        let grouping = match g {
            GroupingToml::Keyword(k) if k == "blocks" => GroupingSpec::Blocks,
            GroupingToml::Keyword(k) if k == "single" => GroupingSpec::Single,
            GroupingToml::Keyword(k) => {
                anyhow::bail!("unknown grouping {k:?}, expected \"blocks\" or \"single\"")
            }
            GroupingToml::Merged { merged } => GroupingSpec::MergedInto(*merged),
        };
        spec = spec.with_grouping(grouping);
    }
    match (&e.tau, &e.fixed_counts) {
        (Some(_), Some(_)) => anyhow::bail!("{}: tau and fixed_counts are exclusive", e.kind),
        (Some(tau), None) => spec = spec.with_selection(BasisSelection::VarianceThreshold(*tau)),
        (None, Some(counts)) => {
            spec = spec.with_selection(BasisSelection::FixedCount(counts.clone()))
        }
        (None, None) => {}
    }
    if let Some(label) = &e.label {
        spec = spec.with_label(label.clone());
    }
    Ok(spec)
}

fn design_mode(name: Option<&str>) -> anyhow::Result<DesignMode> {
    match name.unwrap_or("gaussian") {
        "gaussian" => Ok(DesignMode::GaussianLatent),
        "genotype" => Ok(DesignMode::Genotype),
        other => anyhow::bail!("unknown design mode {other:?}"),
    }
}

pub fn overrides_from_toml(
    overrides: &Option<OverridesToml>,
) -> anyhow::Result<(bool, RefInnerNorm)> {
    let mut xty_norm_panel = true;
    let mut inner = RefInnerNorm::Panel;
    if let Some(o) = overrides {
        if let Some(x) = &o.xty_norm {
            xty_norm_panel = match x.as_str() {
                "panel" => true,
                "training" => false,
                other => anyhow::bail!("unknown xty_norm {other:?}"),
            };
        }
        if let Some(t) = &o.ref_inner_n {
            inner = match t.as_str() {
                "panel" => RefInnerNorm::Panel,
                "training" => RefInnerNorm::Training,
                other => anyhow::bail!("unknown ref_inner_n {other:?}"),
            };
        }
    }
    Ok((xty_norm_panel, inner))
}

/// Builds and validates a harness scenario from the TOML payload.
pub fn scenario_from_toml(
    toml: &ScenarioToml,
    overrides: &Option<OverridesToml>,
    base: &Path,
    seed_override: Option<u64>,
) -> anyhow::Result<Scenario> {
    let (xty_norm_panel, ref_inner_n) = overrides_from_toml(overrides)?;
    let cov_specs = blocks_from_toml(&toml.blocks, base)?;
    let panel_cov_specs = match &toml.panel_blocks {
        Some(blocks) => Some(blocks_from_toml(blocks, base)?),
        None => None,
    };
    let lambda_policy = match &toml.lambda {
        None => LambdaPolicy::OptimalStar,
        Some(l) => match lambda_rule(l)? {
            LambdaRule::Fixed(v) => LambdaPolicy::Fixed(v),
            LambdaRule::OptimalStar => LambdaPolicy::OptimalStar,
            LambdaRule::ScaledQOverN { .. } => {
                anyhow::bail!("scenario-level lambda cannot be a q/n rule")
            }
        },
    };
    let estimators = toml
        .estimators
        .iter()
        .map(estimator_from_toml)
        .collect::<anyhow::Result<Vec<_>>>()?;
    let scenario = Scenario {
        id: toml.id.clone(),
        cov_specs,
        panel_cov_specs,
        n: toml.n,
        n_w: toml.n_w.unwrap_or(toml.n),
        n_z: toml.n_z.unwrap_or(toml.n),
        h2: toml.h2,
        sparsity: toml.sparsity,
        effect_mode: SigmaMode::Iid(toml.sigma_beta_sq.unwrap_or(1.0)),
        design_mode: design_mode(toml.design.as_deref())?,
        estimators,
        lambda_policy,
        replications: toml.replications,
        base_seed: seed_override.unwrap_or(toml.base_seed),
        xty_norm_panel,
        ref_inner_n,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn sweep_axis_from_toml(toml: &SweepToml) -> anyhow::Result<SweepAxis> {
    if toml.values.is_empty() {
        anyhow::bail!("sweep values must be nonempty");
    }
    let axis = match toml.axis.as_str() {
        "omega" => SweepAxis::OmegaGrid(toml.values.clone()),
        "h2" => SweepAxis::H2Grid(toml.values.clone()),
        "lambda" => SweepAxis::LambdaGrid(toml.values.clone()),
        "panel_size" => SweepAxis::PanelSizeGrid(
            toml.values
                .iter()
                .map(|&v| {
                    if v < 3.0 || v.fract() != 0.0 {
                        anyhow::bail!("panel sizes must be integers >= 3, got {v}")
                    } else {
                        Ok(v as usize)
                    }
                })
                .collect::<anyhow::Result<Vec<_>>>()?,
        ),
        "panel_rho" => SweepAxis::PanelRhoGrid(toml.values.clone()),
        other => anyhow::bail!("unknown sweep axis {other:?}"),
    };
    Ok(axis)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scenario]
id = "mini"
n = 500
h2 = 0.5
sparsity = 0.5
replications = 10
base_seed = 7

[[scenario.blocks]]
kind = "identity"
size = 500

[[scenario.estimators]]
kind = "marginal"
"#;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let rendered = render_config(&cfg).unwrap();
        let again = parse_config_str(&rendered).unwrap();
        assert_eq!(cfg, again);
        let scenario =
            scenario_from_toml(cfg.scenario.as_ref().unwrap(), &cfg.overrides, Path::new("."),
                               None)
                .unwrap();
        assert_eq!(scenario.n_w, 500);
        assert_eq!(scenario.n_z, 500);
        assert!(matches!(scenario.lambda_policy, LambdaPolicy::OptimalStar));
    }

    #[test]
    fn unknown_key_named_in_error() {
        let bad = MINIMAL.replace("h2 = 0.5", "heritabilty = 0.5\nh2 = 0.5");
        let err = parse_config_str(&bad).unwrap_err().to_string();
        assert!(err.contains("heritabilty"), "error was: {err}");
    }

    #[test]
    fn invalid_sparsity_reported() {
        let bad = MINIMAL.replace("sparsity = 0.5", "sparsity = 1.3");
        let cfg = parse_config_str(&bad).unwrap();
        let err = scenario_from_toml(cfg.scenario.as_ref().unwrap(), &cfg.overrides,
                                     Path::new("."), None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sparsity"), "error was: {err}");
    }

    #[test]
    fn lambda_forms() {
        assert!(matches!(lambda_rule(&LambdaToml::Number(0.5)).unwrap(), LambdaRule::Fixed(_)));
        assert!(matches!(
            lambda_rule(&LambdaToml::Keyword("star".into())).unwrap(),
            LambdaRule::OptimalStar
        ));
        assert!(matches!(
            lambda_rule(&LambdaToml::QOverN { q_over_n_scale: 2.0 }).unwrap(),
            LambdaRule::ScaledQOverN { .. }
        ));
        assert!(lambda_rule(&LambdaToml::Keyword("auto".into())).is_err());
    }

    #[test]
    fn estimator_kinds_map() {
        for kind in [
            "marginal",
            "ridge",
            "block_ridge",
            "ridge_w",
            "ridge_z",
            "block_ridge_w",
            "block_ridge_z",
        ] {
            let e = EstimatorToml {
                kind: kind.into(),
                lambda: None,
                grouping: None,
                tau: None,
                fixed_counts: None,
                label: None,
            };
            assert!(estimator_from_toml(&e).is_ok(), "{kind}");
        }
        let bad = EstimatorToml {
            kind: "lasso".into(),
            lambda: None,
            grouping: None,
            tau: None,
            fixed_counts: None,
            label: None,
        };
        assert!(estimator_from_toml(&bad).is_err());
    }
}
