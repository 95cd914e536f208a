//! The five subcommands. Each has a `run` that returns structured results
//! and a `write` that emits its files.

pub mod analytic;
pub mod bias_curves;
pub mod debias;
pub mod joint_bias;
pub mod scatter;

use sha2::{Digest, Sha256};

use crate::output::header_line;
use crate::spec::ExperimentSpec;
use crate::{CliError, Command};

/// Trial streams of one (scenario, policy) cell.
pub(crate) const HARD: u64 = 0;
pub(crate) const SPLIT: u64 = 1;
pub(crate) const RANDOMIZED: u64 = 2;
pub(crate) const MCMC: u64 = 3;

/// Master seed for one family of trials, derived from the spec's seed and
/// labels such as (scenario index, policy index, stream).
pub fn cell_seed(master: u64, labels: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for l in labels {
        h.update(l.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// File-name-safe form of a policy or scenario label.
pub(crate) fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Runs `command` and writes its files under the spec's output directory.
pub fn execute(command: Command, spec: &ExperimentSpec) -> Result<String, CliError> {
    let dir = spec.out_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let header = header_line(command.as_str(), &spec.hash(), spec.seed);
    match command {
        Command::BiasCurves => {
            let r = bias_curves::run(spec)?;
            bias_curves::write(&r, &dir, &header)?;
            Ok(r.summary())
        }
        Command::JointBias => {
            let r = joint_bias::run(spec)?;
            let table = joint_bias::write(&r, &dir, &header)?;
            Ok(table)
        }
        Command::Debias => {
            let r = debias::run(spec, Some(&dir))?;
            debias::write(&r, &dir, &header)?;
            Ok(r.summary())
        }
        Command::AnalyticCheck => {
            let r = analytic::run(spec)?;
            analytic::write(&r, &dir, &header)?;
            Ok(r.summary())
        }
        Command::Scatter => {
            let r = scatter::run(spec)?;
            scatter::write(&r, &dir, &header)?;
            Ok(scatter::summary(&r))
        }
    }
}
