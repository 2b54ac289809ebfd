//! CSV rendering of replication results, scenario summaries, and theory
//! curves. Rendering goes through any writer so outputs can be compared
//! byte-for-byte in memory.

use std::io::Write;

use super::ScenarioSummary;
use crate::rmt::AsymptoticPrediction;
use crate::Result;

/// Per-replication results: one row per (scenario, replication, estimator).
pub fn render_results_csv<W: Write>(out: &mut W, summaries: &[ScenarioSummary]) -> Result<()> {
    writeln!(out, "scenario_id,rep,estimator,lambda,a2_empirical")?;
    for summary in summaries {
        for rep in &summary.replications {
            for (i, est) in summary.estimators.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    summary.scenario_id, rep.rep_index, est.label, rep.lambdas[i], rep.a2[i]
                )?;
            }
        }
    }
    Ok(())
}

/// Aggregated summary: one row per (scenario, estimator).
pub fn render_summary_csv<W: Write>(out: &mut W, summaries: &[ScenarioSummary]) -> Result<()> {
    writeln!(out, "scenario_id,estimator,mean,sd,mc_se,a2_theory,gap,formula_id")?;
    for summary in summaries {
        for est in &summary.estimators {
            let theory = est.theory.map(|v| v.to_string()).unwrap_or_default();
            let gap = est.gap.map(|v| v.to_string()).unwrap_or_default();
            let formula = est
                .formula
                .map(|f| {
                    if est.conditional_theory {
                        format!("{f}_conditional")
                    } else {
                        f.to_string()
                    }
                })
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                summary.scenario_id, est.label, est.mean, est.sd, est.mc_se, theory, gap, formula
            )?;
        }
    }
    Ok(())
}

/// One theory-curve row.
#[derive(Debug, Clone)]
pub struct TheoryRow {
    pub scenario_id: String,
    pub omega: f64,
    pub h2: f64,
    pub prediction: AsymptoticPrediction,
}

const THEORY_INTERMEDIATES: [&str; 10] =
    ["R1", "R2", "R3", "Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"];

/// Theory curves: nullable intermediate columns are left empty when a
/// formula does not produce them.
pub fn render_theory_csv<W: Write>(out: &mut W, rows: &[TheoryRow]) -> Result<()> {
    writeln!(
        out,
        "scenario_id,formula_id,lambda,omega,h2,a2,{}",
        THEORY_INTERMEDIATES.join(",")
    )?;
    for row in rows {
        write!(
            out,
            "{},{},{},{},{},{}",
            row.scenario_id,
            row.prediction.formula,
            row.prediction.lambda,
            row.omega,
            row.h2,
            row.prediction.a2
        )?;
        for key in THEORY_INTERMEDIATES {
            match row.prediction.intermediate(key) {
                Some(v) => write!(out, ",{v}")?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Renders to an in-memory buffer (used for byte-identity checks).
pub fn results_csv_bytes(summaries: &[ScenarioSummary]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    render_results_csv(&mut buf, summaries)?;
    Ok(buf)
}

pub fn summary_csv_bytes(summaries: &[ScenarioSummary]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    render_summary_csv(&mut buf, summaries)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{DesignMode, SigmaMode};
    use crate::estimators::EstimatorKind;
    use crate::harness::{
        run_scenario, EstimatorSpec, LambdaPolicy, Scenario,
    };
    use crate::rmt::{a2_identity_closed_forms, RefInnerNorm};
    use crate::spectrum::BlockSpec;

    fn scenario() -> Scenario {
        Scenario {
            id: "report".into(),
            cov_specs: vec![BlockSpec::Ar1 { rho: 0.0, size: 20 }],
            panel_cov_specs: None,
            n: 50,
            n_w: 50,
            n_z: 50,
            h2: 0.5,
            sparsity: 1.0,
            effect_mode: SigmaMode::Iid(1.0),
            design_mode: DesignMode::GaussianLatent,
            estimators: vec![
                EstimatorSpec::new(EstimatorKind::Marginal),
                EstimatorSpec::new(EstimatorKind::Ridge),
            ],
            lambda_policy: LambdaPolicy::OptimalStar,
            replications: 2,
            base_seed: 3,
            xty_norm_panel: true,
            ref_inner_n: RefInnerNorm::Panel,
        }
    }

    #[test]
    fn results_csv_schema_and_rows() {
        let summary = run_scenario(&scenario()).unwrap();
        let bytes = results_csv_bytes(&[summary]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario_id,rep,estimator,lambda,a2_empirical");
        // 2 reps x 2 estimators
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[1].starts_with("report,0,marginal,"));
    }

    #[test]
    fn summary_csv_carries_theory_column() {
        let summary = run_scenario(&scenario()).unwrap();
        let bytes = summary_csv_bytes(&[summary]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.lines().count() == 3);
        let marginal_line = text.lines().nth(1).unwrap();
        assert!(marginal_line.contains("identity_marginal"));
    }

    #[test]
    fn theory_csv_nullable_columns() {
        let forms = a2_identity_closed_forms(0.5, 0.5, 0.5, 0.5, 1.0).unwrap();
        let rows = vec![TheoryRow {
            scenario_id: "t".into(),
            omega: 0.5,
            h2: 0.5,
            prediction: forms.marginal,
        }];
        let mut buf = Vec::new();
        render_theory_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data = text.lines().nth(1).unwrap();
        // identity marginal formula carries no R/Q intermediates
        assert!(data.starts_with("t,identity_marginal,1,0.5,0.5,0.25,"));
        assert!(data.ends_with(",,,,,,,,,"));
    }
}
