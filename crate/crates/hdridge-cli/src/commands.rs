//! Command implementations: run the requested work, write result files, and
//! always emit run metadata. On failure every file created by the command is
//! removed.

use anyhow::Context;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use hdridge::estimators::EstimatorKind;
use hdridge::harness::report::{
    render_results_csv, render_summary_csv, render_theory_csv, TheoryRow,
};
use hdridge::harness::{
    run_scenario, sweep, EstimatorSpec, LambdaPolicy, LambdaRule, Scenario, ScenarioSummary,
};
use hdridge::rmt::{
    a2_block_ref, a2_block_ridge, a2_identity_closed_forms, a2_ridge, optimal_lambda,
    AsymptoticPrediction, BlockEnsemble, PanelKind, RefInnerNorm,
};
use hdridge::spectrum::build_block_covariance;

use crate::config::{
    blocks_from_toml, overrides_from_toml, render_config, scenario_from_toml,
    sweep_axis_from_toml, BlpcToml, OutputFormat, RunConfig, TheoryToml,
};

pub struct RunContext {
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub threads: Option<usize>,
    pub seed_override: Option<u64>,
    pub config_dir: PathBuf,
}

/// Tracks files written by one command so failures can clean up.
struct OutputTracker {
    created: Vec<PathBuf>,
}

impl OutputTracker {
    fn new() -> Self {
        OutputTracker { created: Vec::new() }
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.created.push(path.to_path_buf());
        Ok(())
    }

    fn remove_all(&self) {
        for path in &self.created {
            let _ = fs::remove_file(path);
        }
    }
}

fn config_hash(cfg: &RunConfig) -> anyhow::Result<String> {
    let canonical = render_config(cfg)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn metadata_json(
    command: &str,
    cfg: &RunConfig,
    ctx: &RunContext,
    seed: Option<u64>,
    outputs: &[&str],
) -> anyhow::Result<String> {
    let value = serde_json::json!({
        "command": command,
        "seed": seed,
        "config_hash": config_hash(cfg)?,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": unix_timestamp(),
        "threads": ctx.threads,
        "beta_policy": "redrawn_per_replication",
        "outputs": outputs,
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

fn summaries_to_json(summaries: &[ScenarioSummary]) -> serde_json::Value {
    let scenarios: Vec<serde_json::Value> = summaries
        .iter()
        .map(|s| {
            serde_json::json!({
                "scenario_id": s.scenario_id,
                "mean_realized_h2": s.mean_realized_h2,
                "beta_redrawn_per_replication": s.beta_redrawn_per_replication,
                "estimators": s.estimators.iter().map(|e| serde_json::json!({
                    "label": e.label,
                    "lambda": e.lambda,
                    "mean": e.mean,
                    "sd": e.sd,
                    "mc_se": e.mc_se,
                    "a2_theory": e.theory,
                    "gap": e.gap,
                    "formula_id": e.formula.map(|f| f.to_string()),
                    "conditional_theory": e.conditional_theory,
                })).collect::<Vec<_>>(),
                "replications": s.replications.iter().map(|r| serde_json::json!({
                    "rep": r.rep_index,
                    "a2": r.a2,
                    "lambda": r.lambdas,
                    "realized_h2": r.realized_h2,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::json!({ "scenarios": scenarios })
}

fn write_summaries(
    tracker: &mut OutputTracker,
    ctx: &RunContext,
    summaries: &[ScenarioSummary],
) -> anyhow::Result<Vec<String>> {
    let mut written = Vec::new();
    match ctx.format {
        OutputFormat::Csv => {
            let mut results = Vec::new();
            render_results_csv(&mut results, summaries)?;
            let results_path = ctx.out_dir.join("results.csv");
            tracker.write(&results_path, &results)?;
            written.push("results.csv".to_string());

            let mut summary = Vec::new();
            render_summary_csv(&mut summary, summaries)?;
            let summary_path = ctx.out_dir.join("summary.csv");
            tracker.write(&summary_path, &summary)?;
            written.push("summary.csv".to_string());
        }
        OutputFormat::Json => {
            let value = summaries_to_json(summaries);
            let path = ctx.out_dir.join("results.json");
            tracker.write(&path, serde_json::to_string_pretty(&value)?.as_bytes())?;
            written.push("results.json".to_string());
        }
    }
    Ok(written)
}

fn run_in_pool<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> anyhow::Result<T> {
    match threads {
        None => Ok(job()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .context("building worker pool")?;
            Ok(pool.install(job))
        }
    }
}

fn finish(
    command: &str,
    cfg: &RunConfig,
    ctx: &RunContext,
    tracker: &mut OutputTracker,
    seed: Option<u64>,
    written: &mut Vec<String>,
) -> anyhow::Result<()> {
    written.push("run_metadata.json".to_string());
    let refs: Vec<&str> = written.iter().map(String::as_str).collect();
    let meta = metadata_json(command, cfg, ctx, seed, &refs)?;
    tracker.write(&ctx.out_dir.join("run_metadata.json"), meta.as_bytes())?;
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, ctx: &RunContext) -> anyhow::Result<()> {
    let payload = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("simulate needs a [scenario] table"))?;
    let scenario =
        scenario_from_toml(payload, &cfg.overrides, &ctx.config_dir, ctx.seed_override)?;
    fs::create_dir_all(&ctx.out_dir)?;
    let mut tracker = OutputTracker::new();
    let result = (|| -> anyhow::Result<()> {
        let summary = run_in_pool(ctx.threads, || run_scenario(&scenario))??;
        let mut written = write_summaries(&mut tracker, ctx, &[summary])?;
        finish("simulate", cfg, ctx, &mut tracker, Some(scenario.base_seed), &mut written)
    })();
    if result.is_err() {
        tracker.remove_all();
    }
    result
}

pub fn cmd_sweep(cfg: &RunConfig, ctx: &RunContext) -> anyhow::Result<()> {
    let payload = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("sweep needs a [scenario] table"))?;
    let sweep_toml =
        cfg.sweep.as_ref().ok_or_else(|| anyhow::anyhow!("sweep needs a [sweep] table"))?;
    let base = scenario_from_toml(payload, &cfg.overrides, &ctx.config_dir, ctx.seed_override)?;
    let axis = sweep_axis_from_toml(sweep_toml)?;
    fs::create_dir_all(&ctx.out_dir)?;
    let mut tracker = OutputTracker::new();
    let result = (|| -> anyhow::Result<()> {
        let summaries = run_in_pool(ctx.threads, || sweep(&axis, &base))??;
        let mut written = write_summaries(&mut tracker, ctx, &summaries)?;
        finish("sweep", cfg, ctx, &mut tracker, Some(base.base_seed), &mut written)
    })();
    if result.is_err() {
        tracker.remove_all();
    }
    result
}

fn theory_rows(payload: &TheoryToml, inner: RefInnerNorm, base: &Path) -> anyhow::Result<Vec<TheoryRow>> {
    if payload.h2.is_empty() || payload.omega.is_empty() || payload.formulas.is_empty() {
        anyhow::bail!("theory grids must be nonempty");
    }
    if payload.lambda.as_ref().is_some_and(Vec::is_empty) {
        anyhow::bail!("theory lambda grid must be nonempty when present");
    }
    let specs = blocks_from_toml(&payload.blocks, base)?;
    let cov = build_block_covariance(&specs)?;
    let ens = BlockEnsemble::from_covariance(&cov)?;
    let pooled = ens.pooled()?;
    let is_identity = cov.is_identity();
    let mut rows = Vec::new();
    for &h2 in &payload.h2 {
        for &omega in &payload.omega {
            let lambdas: Vec<f64> = match &payload.lambda {
                Some(grid) => grid.clone(),
                None => vec![optimal_lambda(h2, omega)],
            };
            let omega_ws: Vec<f64> =
                payload.omega_w.clone().unwrap_or_else(|| vec![omega]);
            let omega_zs: Vec<f64> =
                payload.omega_z.clone().unwrap_or_else(|| vec![omega]);
            for &lambda in &lambdas {
                for formula in &payload.formulas {
                    let mut push = |pred: AsymptoticPrediction| {
                        rows.push(TheoryRow {
                            scenario_id: payload.id.clone(),
                            omega,
                            h2,
                            prediction: pred,
                        });
                    };
                    match formula.as_str() {
                        "block_ridge" => push(a2_block_ridge(h2, &ens, omega, lambda)?),
                        "ridge" => {
                            let star = optimal_lambda(h2, omega);
                            if (lambda - star).abs() <= 1e-9 * star.max(1.0) {
                                push(a2_ridge(h2, omega, &pooled, star)?);
                            }
                            // the whole-matrix limit is stated at the
                            // optimum only; other penalties emit no row
                        }
                        "block_ref_w" => {
                            for &omega_w in &omega_ws {
                                push(a2_block_ref(
                                    h2,
                                    &ens,
                                    omega,
                                    lambda,
                                    PanelKind::W { omega_w },
                                    inner,
                                )?);
                            }
                        }
                        "block_ref_z" => {
                            for &omega_z in &omega_zs {
                                push(a2_block_ref(
                                    h2,
                                    &ens,
                                    omega,
                                    lambda,
                                    PanelKind::Z { omega_z },
                                    inner,
                                )?);
                            }
                        }
                        "identity" => {
                            if !is_identity {
                                anyhow::bail!(
                                    "identity closed forms need identity covariance blocks"
                                );
                            }
                            for &omega_w in &omega_ws {
                                for &omega_z in &omega_zs {
                                    let forms = a2_identity_closed_forms(
                                        h2, omega, omega_w, omega_z, lambda,
                                    )?;
                                    push(forms.marginal);
                                    push(forms.ridge);
                                    push(forms.ref_w);
                                    push(forms.ref_z);
                                }
                            }
                        }
                        other => anyhow::bail!("unknown theory formula {other:?}"),
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn cmd_theory(cfg: &RunConfig, ctx: &RunContext) -> anyhow::Result<()> {
    let payload =
        cfg.theory.as_ref().ok_or_else(|| anyhow::anyhow!("theory needs a [theory] table"))?;
    let (_, inner) = overrides_from_toml(&cfg.overrides)?;
    // validate fully before creating any file
    let rows = theory_rows(payload, inner, &ctx.config_dir)?;
    fs::create_dir_all(&ctx.out_dir)?;
    let mut tracker = OutputTracker::new();
    let result = (|| -> anyhow::Result<()> {
        let mut buf = Vec::new();
        render_theory_csv(&mut buf, &rows)?;
        tracker.write(&ctx.out_dir.join("theory.csv"), &buf)?;
        let mut written = vec!["theory.csv".to_string()];
        finish("theory", cfg, ctx, &mut tracker, None, &mut written)
    })();
    if result.is_err() {
        tracker.remove_all();
    }
    result
}

fn blpc_scenarios(payload: &BlpcToml, cfg: &RunConfig, ctx: &RunContext) -> anyhow::Result<Vec<Scenario>> {
    if payload.taus.is_empty() || payload.c_grid.is_empty() {
        anyhow::bail!("blpc tau and c grids must be nonempty");
    }
    let (xty_norm_panel, ref_inner_n) = overrides_from_toml(&cfg.overrides)?;
    let cov_specs = blocks_from_toml(&payload.blocks, &ctx.config_dir)?;
    let mut scenarios = Vec::new();
    for &tau in &payload.taus {
        let mut estimators = vec![EstimatorSpec::new(EstimatorKind::BlpcMarginal)
            .with_selection(hdridge::estimators::BasisSelection::VarianceThreshold(tau))
            .with_label(format!("blpc_marginal_tau{tau}"))];
        for &c in &payload.c_grid {
            estimators.push(
                EstimatorSpec::new(EstimatorKind::BlpcBlockRidge)
                    .with_selection(hdridge::estimators::BasisSelection::VarianceThreshold(tau))
                    .with_lambda(LambdaRule::ScaledQOverN { c })
                    .with_label(format!("blpc_ridge_tau{tau}_c{c}")),
            );
        }
        let scenario = Scenario {
            id: format!("{}_tau_{tau}", payload.id),
            cov_specs: cov_specs.clone(),
            panel_cov_specs: None,
            n: payload.n,
            n_w: payload.n,
            n_z: payload.n_z.unwrap_or(payload.n),
            h2: payload.h2,
            sparsity: payload.sparsity,
            effect_mode: hdridge::datagen::SigmaMode::Iid(1.0),
            design_mode: hdridge::datagen::DesignMode::GaussianLatent,
            estimators,
            lambda_policy: LambdaPolicy::OptimalStar,
            replications: payload.replications,
            base_seed: ctx.seed_override.unwrap_or(payload.base_seed),
            xty_norm_panel,
            ref_inner_n,
        };
        scenario.validate()?;
        scenarios.push(scenario);
    }
    Ok(scenarios)
}

pub fn cmd_blpc(cfg: &RunConfig, ctx: &RunContext) -> anyhow::Result<()> {
    let payload =
        cfg.blpc.as_ref().ok_or_else(|| anyhow::anyhow!("blpc needs a [blpc] table"))?;
    let scenarios = blpc_scenarios(payload, cfg, ctx)?;
    fs::create_dir_all(&ctx.out_dir)?;
    let mut tracker = OutputTracker::new();
    let result = (|| -> anyhow::Result<()> {
        let summaries: Vec<ScenarioSummary> = run_in_pool(ctx.threads, || {
            scenarios.iter().map(run_scenario).collect::<hdridge::Result<Vec<_>>>()
        })??;
        let mut written = write_summaries(&mut tracker, ctx, &summaries)?;
        finish("blpc", cfg, ctx, &mut tracker, Some(scenarios[0].base_seed), &mut written)
    })();
    if result.is_err() {
        tracker.remove_all();
    }
    result
}
