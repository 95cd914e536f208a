//! Arm 1's bias at a snapshot against how often it is sampled afterwards.

use std::fmt::Write as _;
use std::path::Path;

use adabias::simulate::{future_samples_scatter, scatter_correlation, ScatterPoint};

use super::{cell_seed, HARD};
use crate::output::{num, CsvOut};
use crate::spec::ExperimentSpec;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct ScatterCell {
    pub scenario: String,
    pub policy: String,
    pub snapshot: usize,
    pub horizon: usize,
    pub points: Vec<ScatterPoint>,
    pub correlation: f64,
}

pub fn run(spec: &ExperimentSpec) -> Result<Vec<ScatterCell>, CliError> {
    let snapshot = spec
        .scatter
        .ok_or_else(|| CliError::Validation("missing [scatter] section".into()))?
        .snapshot;
    let mut cells = Vec::new();
    for (si, s) in spec.scenarios.iter().enumerate() {
        let arms = s.arms(spec.family, spec.obs_std)?;
        for (pi, p) in spec.policies.iter().enumerate() {
            let points = future_samples_scatter(
                &arms,
                p,
                snapshot,
                s.horizon,
                spec.trials.get(),
                cell_seed(spec.seed, &[si as u64, pi as u64, HARD]),
            )?;
            cells.push(ScatterCell {
                scenario: s.name.clone(),
                policy: p.name(),
                snapshot,
                horizon: s.horizon,
                correlation: scatter_correlation(&points),
                points,
            });
        }
    }
    Ok(cells)
}

pub fn write(cells: &[ScatterCell], dir: &Path, header: &str) -> Result<(), CliError> {
    let mut out = CsvOut::create(
        &dir.join("scatter.csv"),
        header,
        &[
            "scenario",
            "policy",
            "trial",
            "bias_at_snapshot",
            "future_count",
        ],
    )?;
    for c in cells {
        for p in &c.points {
            out.row([
                c.scenario.clone(),
                c.policy.clone(),
                p.trial.to_string(),
                num(p.bias_at_snapshot),
                p.future_count.to_string(),
            ])?;
        }
    }
    out.finish()?;
    let mut out = CsvOut::create(
        &dir.join("scatter_summary.csv"),
        header,
        &[
            "scenario",
            "policy",
            "snapshot",
            "horizon",
            "trials",
            "correlation",
        ],
    )?;
    for c in cells {
        out.row([
            c.scenario.clone(),
            c.policy.clone(),
            c.snapshot.to_string(),
            c.horizon.to_string(),
            c.points.len().to_string(),
            num(c.correlation),
        ])?;
    }
    out.finish()?;
    Ok(())
}

pub fn summary(cells: &[ScatterCell]) -> String {
    let mut s = String::new();
    for c in cells {
        let _ = writeln!(
            s,
            "{} {}: corr(bias at round {}, later pulls) = {:+.4} over {} trials",
            c.scenario,
            c.policy,
            c.snapshot,
            c.correlation,
            c.points.len()
        );
    }
    s
}
