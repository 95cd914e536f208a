//! Per-round bias of every arm's sample mean.

use std::fmt::Write as _;
use std::path::Path;

use adabias::simulate::{run_campaign, CampaignConfig, ExperimentReport};
use adabias::stats::ErrorSummary;

use super::{cell_seed, HARD};
use crate::output::{num, CsvOut};
use crate::spec::ExperimentSpec;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct CurveCell {
    pub scenario: String,
    pub policy: String,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone)]
pub struct BiasCurves {
    pub cells: Vec<CurveCell>,
}

/// Runs every (scenario, policy) pair, reporting either the final round
/// only or the spec's checkpoints (every round when unset). Both choices
/// see the same trials.
pub(crate) fn campaigns(
    spec: &ExperimentSpec,
    final_only: bool,
) -> Result<Vec<CurveCell>, CliError> {
    let mut cells = Vec::new();
    for (si, s) in spec.scenarios.iter().enumerate() {
        let arms = s.arms(spec.family, spec.obs_std)?;
        let checkpoints = match (final_only, &spec.checkpoints) {
            (true, _) => vec![s.horizon],
            (false, Some(c)) => c.clone(),
            (false, None) => (1..=s.horizon).collect(),
        };
        for (pi, p) in spec.policies.iter().enumerate() {
            let report = run_campaign(&CampaignConfig {
                arms: arms.clone(),
                policy: *p,
                horizon: s.horizon,
                n_trials: spec.trials.get(),
                master_seed: cell_seed(spec.seed, &[si as u64, pi as u64, HARD]),
                checkpoints: checkpoints.clone(),
            })?;
            cells.push(CurveCell {
                scenario: s.name.clone(),
                policy: p.name(),
                report,
            });
        }
    }
    Ok(cells)
}

pub fn run(spec: &ExperimentSpec) -> Result<BiasCurves, CliError> {
    Ok(BiasCurves {
        cells: campaigns(spec, false)?,
    })
}

fn summary_fields(s: &ErrorSummary) -> [String; 5] {
    [
        num(s.bias),
        num(s.bias_se),
        num(s.mse),
        s.trials.to_string(),
        s.excluded.to_string(),
    ]
}

pub fn write(r: &BiasCurves, dir: &Path, header: &str) -> Result<(), CliError> {
    let mut out = CsvOut::create(
        &dir.join("bias_curves.csv"),
        header,
        &[
            "scenario", "policy", "round", "arm", "bias", "se", "mse", "trials", "excluded",
        ],
    )?;
    for c in &r.cells {
        for cp in &c.report.checkpoints {
            let arms = cp.arms.iter().enumerate().map(|(a, s)| (a.to_string(), s));
            for (arm, s) in arms.chain(std::iter::once(("pooled".to_string(), &cp.pooled))) {
                let mut row = vec![
                    c.scenario.clone(),
                    c.policy.clone(),
                    cp.round.to_string(),
                    arm,
                ];
                row.extend(summary_fields(s));
                out.row(row)?;
            }
        }
    }
    out.finish()?;
    Ok(())
}

impl BiasCurves {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.cells {
            let last = c.report.last();
            let _ = write!(s, "{} {} round {}:", c.scenario, c.policy, last.round);
            for (a, e) in last.arms.iter().enumerate() {
                let _ = write!(s, " arm{} {:+.4} (se {:.4})", a + 1, e.bias, e.bias_se);
            }
            s.push('\n');
        }
        s
    }
}
