//! Randomized checks of the Exploit and IIO properties of selection functions.
//!
//! Exploit: with the seed `ω` pinned, if arm `k` wins with a lower-mean
//! history it still wins after its history is replaced by one of the same
//! length with a higher mean.
//!
//! IIO: conditioned on arm `k` not being chosen, the law of the choice does
//! not depend on `k`'s history. A selection function exposes its law as a
//! mixture over seed branches; the conditional laws are compared branch by
//! branch and exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{softmax, DecisionStatVector, Omega, Policy, PolicyConfig};
use crate::rng::RngStream;

/// Per-arm sample lists `Λ_t^(k)`.
pub type History = Vec<Vec<f64>>;

pub trait SelectionFunction {
    fn name(&self) -> String;

    fn draw_omega(&self, k: usize, rng: &mut RngStream) -> Omega;

    /// `f(Λ, ω)` with the seed pinned.
    fn select(&self, history: &History, omega: &Omega) -> usize;

    /// Law of `f(Λ, ·)` as weighted branches, each a distribution over arms.
    fn branches(&self, history: &History) -> Vec<(f64, Vec<f64>)>;
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

impl PolicyConfig {
    fn history_stats(&self, history: &History) -> DecisionStatVector {
        DecisionStatVector(
            history
                .iter()
                .map(|h| self.index(mean(h), h.len()).expect("deterministic index"))
                .collect(),
        )
    }
}

impl SelectionFunction for PolicyConfig {
    fn name(&self) -> String {
        PolicyConfig::name(self)
    }

    fn draw_omega(&self, k: usize, rng: &mut RngStream) -> Omega {
        let mut gumbel_rng = ChaCha8Rng::seed_from_u64(rng.random());
        PolicyConfig::draw_omega(self, k, rng, &mut gumbel_rng)
    }

    fn select(&self, history: &History, omega: &Omega) -> usize {
        self.select_with(&self.history_stats(history), omega)
    }

    fn branches(&self, history: &History) -> Vec<(f64, Vec<f64>)> {
        let stats = self.history_stats(history);
        let k = stats.len();
        let core = match self.gumbel {
            Some(g) => softmax(&stats.0, g.tau),
            None => {
                let mut p = vec![0.0; k];
                p[crate::policy::argmax(&stats.0)] = 1.0;
                p
            }
        };
        match self.policy {
            Policy::EpsGreedy { epsilon } => {
                vec![(epsilon, vec![1.0 / k as f64; k]), (1.0 - epsilon, core)]
            }
            _ => vec![(1.0, core)],
        }
    }
}

/// Random histories: `K` in `2..=max_arms`, lengths in `1..=max_len`,
/// values `N(0, scale²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceGenerator {
    pub max_arms: usize,
    pub max_len: usize,
    pub scale: f64,
}

impl Default for InstanceGenerator {
    fn default() -> Self {
        Self {
            max_arms: 5,
            max_len: 8,
            scale: 1.0,
        }
    }
}

impl InstanceGenerator {
    fn list(&self, len: usize, rng: &mut RngStream) -> Vec<f64> {
        let normal = Normal::new(0.0, self.scale).expect("valid scale");
        (0..len).map(|_| normal.sample(rng)).collect()
    }

    pub fn history(&self, rng: &mut RngStream) -> History {
        let k = rng.random_range(2..=self.max_arms);
        (0..k)
            .map(|_| {
                let n = rng.random_range(1..=self.max_len);
                self.list(n, rng)
            })
            .collect()
    }

    /// A replacement for arm `k`'s history of the same length.
    pub fn replacement(&self, history: &History, k: usize, rng: &mut RngStream) -> Vec<f64> {
        self.list(history[k].len(), rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub arm: usize,
    pub history: History,
    pub alternative: History,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub policy: String,
    pub instances: usize,
    pub passed: bool,
    pub counterexample: Option<Counterexample>,
}

fn report(
    property: &str,
    policy: String,
    instances: usize,
    counterexample: Option<Counterexample>,
) -> PropertyReport {
    PropertyReport {
        property: property.into(),
        policy,
        instances,
        passed: counterexample.is_none(),
        counterexample,
    }
}

fn reject_thompson(policy: &dyn SelectionFunction) -> Result<()> {
    if policy.name().starts_with("thompson") {
        return Err(Error::InvalidPolicy(
            "property checks need a deterministic decision index".into(),
        ));
    }
    Ok(())
}

/// Checks Exploit on `n` random instances with the seed pinned per instance.
/// Stops at the first counterexample.
pub fn check_exploit(
    policy: &dyn SelectionFunction,
    generator: &InstanceGenerator,
    n: usize,
    rng: &mut RngStream,
) -> Result<PropertyReport> {
    reject_thompson(policy)?;
    for i in 0..n {
        let low = generator.history(rng);
        let k = rng.random_range(0..low.len());
        let mut high = low.clone();
        high[k] = generator.replacement(&low, k, rng);
        let (low, high) = if mean(&high[k]) >= mean(&low[k]) {
            (low, high)
        } else {
            (high, low)
        };
        let omega = policy.draw_omega(low.len(), rng);
        let with_low = policy.select(&low, &omega);
        let with_high = policy.select(&high, &omega);
        if with_low == k && with_high != k {
            let cx = Counterexample {
                arm: k,
                history: low,
                alternative: high,
                detail: format!(
                    "arm {k} wins with the lower mean but arm {with_high} wins with the higher"
                ),
            };
            return Ok(report("exploit", policy.name(), i + 1, Some(cx)));
        }
    }
    Ok(report("exploit", policy.name(), n, None))
}

/// Law of the choice given that it is not `k`, or `None` if the branch
/// always picks `k`.
fn conditional_excluding(p: &[f64], k: usize) -> Option<Vec<f64>> {
    let rest: f64 = p
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, x)| x)
        .sum();
    (rest > 0.0).then(|| {
        p.iter()
            .enumerate()
            .map(|(i, &x)| if i == k { 0.0 } else { x / rest })
            .collect()
    })
}

/// Checks IIO on `n` random instances by comparing exact conditional laws
/// branch by branch.
pub fn check_iio(
    policy: &dyn SelectionFunction,
    generator: &InstanceGenerator,
    n: usize,
    rng: &mut RngStream,
) -> Result<PropertyReport> {
    reject_thompson(policy)?;
    for i in 0..n {
        let a = generator.history(rng);
        let k = rng.random_range(0..a.len());
        let mut b = a.clone();
        b[k] = generator.replacement(&a, k, rng);
        let (ba, bb) = (policy.branches(&a), policy.branches(&b));
        for (j, ((wa, pa), (wb, pb))) in ba.iter().zip(&bb).enumerate() {
            debug_assert_eq!(wa, wb);
            let (Some(ca), Some(cb)) = (conditional_excluding(pa, k), conditional_excluding(pb, k))
            else {
                continue;
            };
            let gap = ca
                .iter()
                .zip(&cb)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if gap > 1e-12 {
                let cx = Counterexample {
                    arm: k,
                    history: a,
                    alternative: b,
                    detail: format!("branch {j}: conditional laws {ca:?} vs {cb:?}"),
                };
                return Ok(report("iio", policy.name(), i + 1, Some(cx)));
            }
        }
    }
    Ok(report("iio", policy.name(), n, None))
}
