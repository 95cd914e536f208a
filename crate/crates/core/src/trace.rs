//! The record of one collection run.
//!
//! Rounds are numbered `1..=T`. Round `t <= K` samples arm `t - 1`
//! (round-robin warm-up); from then on the selection for round `t + 1` is
//! made from the decision statistics `U_t` computed after round `t`.
//! `decision_stats[j]` therefore holds `U_{K+j}` and chose `selections[K+j]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arm::ArmModel;
use crate::error::{Error, Result};
use crate::estimators::EstimateVector;
use crate::policy::{DecisionStatVector, PolicyConfig};
use crate::rng::TrialSeed;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trace {
    pub schema_version: u32,
    pub arms: Vec<ArmModel>,
    pub policy: PolicyConfig,
    pub horizon: usize,
    /// Stream address the trace was generated from, if simulated.
    pub seed: Option<TrialSeed>,
    /// Zero-based arm selected in each round.
    pub selections: Vec<usize>,
    /// Per-arm samples in arrival order.
    pub samples: Vec<Vec<f64>>,
    pub decision_stats: Vec<DecisionStatVector>,
    /// ε-Greedy's uniform seed for each policy-driven round.
    pub explore_uniforms: Option<Vec<f64>>,
    /// Gumbel perturbations for each policy-driven round.
    pub gumbel_draws: Option<Vec<Vec<f64>>>,
    /// Per-arm held-out twins when data splitting was on.
    pub held_out: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub estimates: BTreeMap<String, EstimateVector>,
}

impl Trace {
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of policy-driven rounds, `T - K`.
    pub fn policy_rounds(&self) -> usize {
        self.horizon - self.num_arms()
    }

    pub fn is_split(&self) -> bool {
        self.held_out.is_some()
    }

    /// `N_t^(k)` for every arm after `t` rounds.
    pub fn counts_at(&self, t: usize) -> Vec<usize> {
        let mut counts = vec![0; self.num_arms()];
        for &s in &self.selections[..t.min(self.selections.len())] {
            counts[s] += 1;
        }
        counts
    }

    pub fn final_counts(&self) -> Vec<usize> {
        self.samples.iter().map(Vec::len).collect()
    }

    /// `X̄_t^(arm)`, the mean of the arm's first `N_t^(arm)` samples.
    pub fn sample_mean(&self, arm: usize, t: usize) -> Result<f64> {
        let n = self.selections[..t.min(self.selections.len())]
            .iter()
            .filter(|&&s| s == arm)
            .count();
        if n == 0 {
            return Err(Error::UndefinedMean { arm, round: t });
        }
        Ok(self.samples[arm][..n].iter().sum::<f64>() / n as f64)
    }

    pub fn final_means(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect()
    }

    /// Round (1-based) at which each of the arm's samples arrived.
    pub fn arrival_rounds(&self, arm: usize) -> Vec<usize> {
        self.selections
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == arm)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrace(m));
        if self.schema_version != TRACE_SCHEMA_VERSION {
            return bad(format!(
                "schema version {} (expected {TRACE_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let k = self.num_arms();
        if k == 0 {
            return bad("no arms".into());
        }
        for arm in &self.arms {
            arm.validate()?;
        }
        self.policy.validate()?;
        if self.horizon < k {
            return bad(format!(
                "horizon {} shorter than arm count {k}",
                self.horizon
            ));
        }
        if self.selections.len() != self.horizon {
            return bad(format!(
                "{} selections for horizon {}",
                self.selections.len(),
                self.horizon
            ));
        }
        for (t, &s) in self.selections.iter().enumerate() {
            if s >= k {
                return bad(format!("selection {s} at round {} out of range", t + 1));
            }
            if t < k && s != t {
                return bad(format!("round {} must warm up arm {t}", t + 1));
            }
        }
        if self.samples.len() != k {
            return bad(format!("{} sample lists for {k} arms", self.samples.len()));
        }
        let counts = self.counts_at(self.horizon);
        for (arm, (list, &n)) in self.samples.iter().zip(&counts).enumerate() {
            if list.len() != n {
                return bad(format!(
                    "arm {arm}: {} samples but {n} selections",
                    list.len()
                ));
            }
            if list.iter().any(|x| !x.is_finite()) {
                return bad(format!("arm {arm}: non-finite sample"));
            }
        }
        let rounds = self.policy_rounds();
        if self.decision_stats.len() != rounds {
            return bad(format!(
                "{} decision-stat vectors for {rounds} policy rounds",
                self.decision_stats.len()
            ));
        }
        if self
            .decision_stats
            .iter()
            .any(|u| u.len() != k || u.0.iter().any(|x| !x.is_finite()))
        {
            return bad("decision statistics must be finite with one entry per arm".into());
        }
        if let Some(g) = &self.gumbel_draws {
            if g.len() != rounds || g.iter().any(|v| v.len() != k) {
                return bad("Gumbel draws must have one vector per policy round".into());
            }
        }
        if let Some(u) = &self.explore_uniforms {
            if u.len() != rounds {
                return bad("exploration seeds must have one entry per policy round".into());
            }
        }
        if let Some(h) = &self.held_out {
            if h.len() != k || h.iter().zip(&counts).any(|(l, &n)| l.len() != n) {
                return bad("held-out lists must mirror the selection counts".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let trace: Trace = serde_json::from_str(s)?;
        trace.validate()?;
        Ok(trace)
    }
}
