//! Experiment configuration: a TOML or JSON file plus flag overrides.

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use adabias::cmle::CmleConfig;
use adabias::estimators::Method;
use adabias::{ArmModel, Family, Policy, PolicyConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

fn default_trials() -> NonZeroUsize {
    NonZeroUsize::new(1000).unwrap()
}

fn default_obs_std() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: NonZeroUsize,
    #[serde(default = "default_family")]
    pub family: Family,
    /// Gaussian observation noise shared by all arms.
    #[serde(default = "default_obs_std")]
    pub obs_std: f64,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub policies: Vec<PolicyConfig>,
    /// Rounds reported by bias-curves; every round when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatter: Option<ScatterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debias: Option<DebiasSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticSpec>,
    /// Not part of the hash; `--out-dir` takes precedence.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

fn default_family() -> Family {
    Family::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawScenario")]
pub struct Scenario {
    pub name: String,
    pub means: Vec<f64>,
    pub horizon: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    means: Vec<f64>,
    horizon: usize,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = String;

    fn try_from(raw: RawScenario) -> Result<Self, String> {
        let k = raw.means.len();
        if k < 2 {
            return Err(format!("a scenario needs at least 2 means, got {k}"));
        }
        if let Some(m) = raw.means.iter().find(|m| !m.is_finite()) {
            return Err(format!("mean {m} is not finite"));
        }
        if raw.horizon < k {
            return Err(format!(
                "horizon {} is shorter than the {k} warm-up rounds",
                raw.horizon
            ));
        }
        let name = raw.name.unwrap_or_else(|| format!("T{}_K{k}", raw.horizon));
        if name.is_empty() || name.contains(|c: char| c == ',' || c.is_whitespace()) {
            return Err(format!(
                "scenario name `{name}` must be non-empty without commas or spaces"
            ));
        }
        Ok(Scenario {
            name,
            means: raw.means,
            horizon: raw.horizon,
        })
    }
}

impl Scenario {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn arms(&self, family: Family, obs_std: f64) -> adabias::Result<Vec<ArmModel>> {
        self.means
            .iter()
            .map(|&m| match family {
                Family::Gaussian => ArmModel::gaussian(m, obs_std),
                Family::Bernoulli => ArmModel::bernoulli(m),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSpec {
    /// Round at which arm 1's bias is measured.
    pub snapshot: usize,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebiasSpec {
    #[serde(default = "all_methods")]
    pub estimators: Vec<Method>,
    /// Fit settings for index policies. `tau` is also the Gumbel scale of
    /// the randomized runs; `seed` is mixed with the master seed.
    #[serde(default)]
    pub cmle: CmleConfig,
    /// Fit settings for Thompson Sampling.
    #[serde(default = "CmleConfig::thompson")]
    pub cmle_thompson: CmleConfig,
    /// Trials fitted by cMLE, at most `trials`; defaults to `trials`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmle_trials: Option<NonZeroUsize>,
    /// Run the split policy for `T/2` rounds, so that it draws `T` samples
    /// in total like the unsplit run.
    #[serde(default = "yes")]
    pub budget_matched_split: bool,
    /// Write every randomized trace with its estimates under `traces/`.
    #[serde(default)]
    pub save_traces: bool,
}

fn default_grid() -> usize {
    41
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSpec {
    /// Points per axis on `[0, 1]`; a single point sits at 0.
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub horizons: Vec<usize>,
    #[serde(default = "greedy")]
    pub policy: PolicyConfig,
}

fn greedy() -> PolicyConfig {
    PolicyConfig::new(Policy::Greedy)
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Parses TOML, or JSON when the file ends in `.json`. Parse errors
    /// carry the line and column.
    pub fn from_str_with_format(text: &str, json: bool) -> Result<Self, CliError> {
        if json {
            serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::from_str_with_format(&text, json)
            .map_err(|e| CliError::Validation(format!("{}: {}", path.display(), e.message())))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(t) = o.trials {
            self.trials = NonZeroUsize::new(t)
                .ok_or_else(|| CliError::Validation("--trials must be at least 1".into()))?;
        }
        if o.out_dir.is_some() {
            self.out_dir.clone_from(&o.out_dir);
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn cmle_trials(&self) -> usize {
        self.debias
            .as_ref()
            .and_then(|d| d.cmle_trials)
            .map_or(self.trials, |n| n.min(self.trials))
            .get()
    }

    fn check_runs(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.scenarios.is_empty() {
            return bad("at least one [[scenarios]] entry is required".into());
        }
        if self.policies.is_empty() {
            return bad("at least one [[policies]] entry is required".into());
        }
        if !(self.obs_std > 0.0 && self.obs_std.is_finite()) {
            return bad(format!("obs_std must be > 0, got {}", self.obs_std));
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            if let Err(e) = s.arms(self.family, self.obs_std) {
                return bad(format!("scenarios[{i}] ({}): {e}", s.name));
            }
            if self.scenarios[..i].iter().any(|o| o.name == s.name) {
                return bad(format!("scenarios[{i}]: duplicate name `{}`", s.name));
            }
        }
        for (i, p) in self.policies.iter().enumerate() {
            if matches!(p.policy, Policy::Thompson(_)) && self.family != Family::Gaussian {
                return bad(format!(
                    "policies[{i}]: Thompson Sampling needs Gaussian arms"
                ));
            }
        }
        Ok(())
    }

    /// Checks everything `command` needs before any work starts.
    pub fn validate_for(&self, command: crate::Command) -> Result<(), CliError> {
        use crate::Command;
        let bad = |m: String| Err(CliError::Validation(m));
        match command {
            Command::BiasCurves | Command::JointBias => {
                self.check_runs()?;
                if command == Command::BiasCurves {
                    if let Some(cps) = &self.checkpoints {
                        if cps.is_empty() {
                            return bad("checkpoints must not be empty".into());
                        }
                        for s in &self.scenarios {
                            if let Some(c) = cps.iter().find(|&&c| c == 0 || c > s.horizon) {
                                return bad(format!(
                                    "checkpoint {c} outside 1..={} of scenario `{}`",
                                    s.horizon, s.name
                                ));
                            }
                        }
                    }
                }
            }
            Command::Scatter => {
                self.check_runs()?;
                let Some(sc) = self.scatter else {
                    return bad("the scatter command needs a [scatter] section".into());
                };
                for s in &self.scenarios {
                    if sc.snapshot < s.k() || sc.snapshot >= s.horizon {
                        return bad(format!(
                            "scatter.snapshot {} must lie in [K, T) = [{}, {}) for scenario `{}`",
                            sc.snapshot,
                            s.k(),
                            s.horizon,
                            s.name
                        ));
                    }
                }
            }
            Command::Debias => {
                self.check_runs()?;
                let Some(d) = &self.debias else {
                    return bad("the debias command needs a [debias] section".into());
                };
                if d.estimators.is_empty() {
                    return bad("debias.estimators must not be empty".into());
                }
                for (name, c) in [
                    ("debias.cmle", &d.cmle),
                    ("debias.cmle_thompson", &d.cmle_thompson),
                ] {
                    if let Err(e) = c.validate() {
                        return bad(format!("{name}: {e}"));
                    }
                }
                if d.cmle_thompson.tau != d.cmle.tau {
                    return bad("debias.cmle.tau and debias.cmle_thompson.tau must agree".into());
                }
                if d.estimators.contains(&Method::Cmle) && self.family != Family::Gaussian {
                    return bad("cmle supports Gaussian arms only".into());
                }
                if d.budget_matched_split && d.estimators.contains(&Method::Heldout) {
                    for s in &self.scenarios {
                        if s.horizon / 2 < s.k() {
                            return bad(format!(
                                "scenario `{}`: budget-matched split horizon {} is shorter than K = {}",
                                s.name,
                                s.horizon / 2,
                                s.k()
                            ));
                        }
                    }
                }
            }
            Command::AnalyticCheck => {
                let Some(a) = &self.analytic else {
                    return bad("the analytic-check command needs an [analytic] section".into());
                };
                if a.grid == 0 {
                    return bad("analytic.grid must be at least 1".into());
                }
                if a.horizons.is_empty() {
                    return bad("analytic.horizons must not be empty".into());
                }
                if matches!(a.policy.policy, Policy::Thompson(_)) {
                    return bad(
                        "analytic.policy: Thompson Sampling has no exact enumeration".into(),
                    );
                }
                for &h in &a.horizons {
                    if !(2..=adabias::simulate::MAX_EXACT_HORIZON).contains(&h) {
                        return bad(format!(
                            "analytic horizon {h} outside 2..={}",
                            adabias::simulate::MAX_EXACT_HORIZON
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
