//! Baseline mean estimators computed from a trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    Heldout,
    Propensity,
    Cmle,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Naive,
        Method::Heldout,
        Method::Propensity,
        Method::Cmle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Heldout => "heldout",
            Method::Propensity => "propensity",
            Method::Cmle => "cmle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown estimator `{s}`"))
    }
}

/// Per-arm estimates `μ̂_k`; `None` marks an arm the method cannot estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateVector {
    pub method: Method,
    pub estimates: Vec<Option<f64>>,
    /// Samples (or, for propensity, rounds) behind each estimate.
    pub counts: Vec<usize>,
}

impl EstimateVector {
    /// Errors against the true arm means.
    pub fn errors(&self, trace: &Trace) -> Vec<Option<f64>> {
        self.estimates
            .iter()
            .zip(&trace.arms)
            .map(|(e, a)| e.map(|e| e - a.mean))
            .collect()
    }
}

/// Stores `est` in the trace's `estimates` map under its method name.
pub fn attach(trace: &mut Trace, est: EstimateVector) {
    trace.estimates.insert(est.method.to_string(), est);
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample means at the horizon.
pub fn naive_estimate(trace: &Trace) -> EstimateVector {
    EstimateVector {
        method: Method::Naive,
        estimates: trace.samples.iter().map(|s| mean(s)).collect(),
        counts: trace.final_counts(),
    }
}

/// Means of the held-out twins, which never influenced any selection.
pub fn heldout_estimate(trace: &Trace) -> Result<EstimateVector> {
    let held = trace.held_out.as_ref().ok_or(Error::SplitMissing)?;
    Ok(EstimateVector {
        method: Method::Heldout,
        estimates: held.iter().map(|h| mean(h)).collect(),
        counts: held.iter().map(Vec::len).collect(),
    })
}

/// Inverse-propensity-weighted means.
///
/// `μ̂_k = (X_init^(k) + Σ_{t>K} 1{s_t = k} X_t / P[s_t = k]) / (T - K + 1)`,
/// where `X_init^(k)` is the arm's warm-up sample (selected with
/// probability one) and the probabilities are recomputed from the recorded
/// decision statistics. Every arm must have positive selection probability
/// in every policy round, otherwise the estimator is biased and
/// `ZeroPropensity` is returned.
pub fn propensity_estimate(trace: &Trace) -> Result<EstimateVector> {
    let k = trace.num_arms();
    let policy = &trace.policy;
    let mut totals: Vec<f64> = (0..k).map(|a| trace.samples[a][0]).collect();
    let mut next = vec![1usize; k];
    for (j, stats) in trace.decision_stats.iter().enumerate() {
        let round = k + j + 1;
        for arm in 0..k {
            if policy.log_selection_probability(stats, arm) == f64::NEG_INFINITY {
                return Err(Error::ZeroPropensity { arm, round });
            }
        }
        let s = trace.selections[k + j];
        let x = trace.samples[s][next[s]];
        next[s] += 1;
        totals[s] += x * (-policy.log_selection_probability(stats, s)).exp();
    }
    let denom = (trace.policy_rounds() + 1) as f64;
    Ok(EstimateVector {
        method: Method::Propensity,
        estimates: totals.into_iter().map(|t| Some(t / denom)).collect(),
        counts: vec![trace.policy_rounds() + 1; k],
    })
}
