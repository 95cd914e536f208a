//! How many arms are negatively biased in the same trial.

use std::fmt::Write as _;
use std::path::Path;

use super::bias_curves::campaigns;
use crate::output::{num, write_text, CsvOut};
use crate::spec::ExperimentSpec;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct JointCell {
    pub scenario: String,
    pub policy: String,
    pub round: usize,
    pub trials: usize,
    /// `fractions[m]`: share of trials with exactly `m` arms whose final
    /// sample mean is below the true mean.
    pub fractions: Vec<f64>,
}

pub fn run(spec: &ExperimentSpec) -> Result<Vec<JointCell>, CliError> {
    Ok(campaigns(spec, true)?
        .into_iter()
        .map(|c| {
            let last = c.report.last();
            JointCell {
                round: last.round,
                trials: c.report.config.n_trials,
                fractions: last.joint_bias.clone(),
                scenario: c.scenario,
                policy: c.policy,
            }
        })
        .collect())
}

/// Writes the CSV and the rendered table; returns the table.
pub fn write(cells: &[JointCell], dir: &Path, header: &str) -> Result<String, CliError> {
    let mut out = CsvOut::create(
        &dir.join("joint_bias.csv"),
        header,
        &["scenario", "policy", "round", "trials", "m", "fraction"],
    )?;
    for c in cells {
        for (m, f) in c.fractions.iter().enumerate() {
            out.row([
                c.scenario.clone(),
                c.policy.clone(),
                c.round.to_string(),
                c.trials.to_string(),
                m.to_string(),
                num(*f),
            ])?;
        }
    }
    out.finish()?;
    let table = render(cells);
    write_text(&dir.join("joint_bias.txt"), header, &table)?;
    Ok(table)
}

pub fn render(cells: &[JointCell]) -> String {
    let mut s = String::new();
    let mut current: Option<&str> = None;
    let width = cells
        .iter()
        .map(|c| c.policy.len())
        .max()
        .unwrap_or(6)
        .max(6);
    for c in cells {
        if current != Some(&c.scenario) {
            if current.is_some() {
                s.push('\n');
            }
            current = Some(&c.scenario);
            let _ = writeln!(s, "{} (round {}, {} trials)", c.scenario, c.round, c.trials);
            let _ = write!(s, "{:width$}", "policy");
            for m in 0..c.fractions.len() {
                let _ = write!(s, "  {:>6}", format!("m={m}"));
            }
            s.push('\n');
        }
        let _ = write!(s, "{:width$}", c.policy);
        for f in &c.fractions {
            let _ = write!(s, "  {f:>6.3}");
        }
        s.push('\n');
    }
    s
}
