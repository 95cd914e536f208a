//! Batch experiment driver for the `adabias` command.
//!
//! Every command reads an [`ExperimentSpec`], runs its campaigns and writes
//! plot-ready CSV files whose first line is a comment naming the command,
//! the spec hash and the master seed. Outputs depend only on the spec and
//! seed, never on the thread count.

pub mod commands;
pub mod output;
pub mod spec;

use std::fmt;
use std::path::Path;

pub use spec::{ExperimentSpec, Overrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BiasCurves,
    JointBias,
    Debias,
    AnalyticCheck,
    Scatter,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::BiasCurves => "bias-curves",
            Command::JointBias => "joint-bias",
            Command::Debias => "debias",
            Command::AnalyticCheck => "analytic-check",
            Command::Scatter => "scatter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or flags; nothing was written.
    Validation(String),
    /// A run or a write failed.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m.clone(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<adabias::Error> for CliError {
    fn from(e: adabias::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Loads, overrides and validates the spec, then runs `command` on
/// `threads` workers. Returns the human-readable summary.
pub fn run(
    command: Command,
    config: &Path,
    overrides: &Overrides,
    threads: usize,
) -> Result<String, CliError> {
    let mut spec = ExperimentSpec::load(config)?;
    spec.apply(overrides)?;
    spec.validate_for(command)?;
    if threads == 0 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    adabias::simulate::with_threads(threads, || commands::execute(command, &spec))
}
