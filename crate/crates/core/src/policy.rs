//! Selection functions `f(Λ_t, ω)`.
//!
//! Every policy compares a vector of per-arm decision statistics `U_t`.
//! Greedy and ε-Greedy use the sample means, lil' UCB adds a count-dependent
//! confidence bonus, and Thompson Sampling uses one posterior draw per arm.
//! Any policy can be wrapped with centered Gumbel noise of scale `τ`, which
//! turns its hard argmax into a softmax.

use rand::Rng;
use rand_distr::{Distribution, Gumbel, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant; the mean of a standard Gumbel variable.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LilUcbParams {
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Only used by lil' UCB's stopping rule, which a fixed horizon never
    /// reaches. Kept for the record.
    pub alpha: f64,
}

impl Default for LilUcbParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            epsilon: 0.01,
            delta: 0.005,
            alpha: 9.0,
        }
    }
}

impl LilUcbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.epsilon > 0.0 && self.delta > 0.0) {
            return Err(Error::InvalidPolicy(format!(
                "lil' UCB needs beta >= 0, epsilon > 0, delta > 0; got {self:?}"
            )));
        }
        // The inner log grows with the count, so n = 1 is the binding case.
        let ratio = (1.0 + self.epsilon).ln() / self.delta;
        if !(ratio > 1.0) {
            return Err(Error::NonpositiveLogArgument { ratio });
        }
        Ok(())
    }

    /// Confidence bonus for an arm with `n >= 1` samples.
    pub fn bonus(&self, n: usize) -> f64 {
        let n = n as f64;
        let e = self.epsilon;
        let inner = ((1.0 + e) * n).ln() / self.delta;
        (1.0 + self.beta) * (1.0 + e.sqrt()) * (2.0 * (1.0 + e) * inner.ln() / n).sqrt()
    }
}

/// Gaussian prior `N(mu0, sigma0_sq)` shared by all arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThompsonPrior {
    pub mu0: f64,
    pub sigma0_sq: f64,
}

impl Default for ThompsonPrior {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            sigma0_sq: 25.0,
        }
    }
}

impl ThompsonPrior {
    /// Posterior `(mean, variance)` after `n` observations with sum `sum`
    /// and known observation variance `obs_var`.
    pub fn posterior(&self, sum: f64, n: usize, obs_var: f64) -> (f64, f64) {
        let precision = 1.0 / self.sigma0_sq + n as f64 / obs_var;
        let var = 1.0 / precision;
        (var * (self.mu0 / self.sigma0_sq + sum / obs_var), var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Greedy,
    EpsGreedy { epsilon: f64 },
    LilUcb(LilUcbParams),
    Thompson(ThompsonPrior),
}

/// Centered Gumbel randomization with constant scale `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelNoise {
    pub tau: f64,
}

/// A policy plus optional Gumbel randomization.
///
/// Serialized flat, e.g. `{"kind": "lil_ucb", "beta": 1.0, "gumbel_tau": 1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy", into = "RawPolicy")]
pub struct PolicyConfig {
    pub policy: Policy,
    pub gumbel: Option<GumbelNoise>,
}

/// Per-arm decision statistics `U_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionStatVector(pub Vec<f64>);

impl DecisionStatVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The random seed `ω` of one selection, made explicit so that a selection
/// can be replayed with the seed pinned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Omega {
    /// Uniform draw on `[0, 1)` deciding ε-Greedy's exploration branch.
    pub uniform: Option<f64>,
    /// Per-arm centered Gumbel perturbations.
    pub gumbel: Option<Vec<f64>>,
}

impl PolicyConfig {
    pub fn new(policy: Policy) -> Self {
        Self {
            policy,
            gumbel: None,
        }
    }

    pub fn with_gumbel(mut self, tau: f64) -> Self {
        self.gumbel = Some(GumbelNoise { tau });
        self
    }

    pub fn without_gumbel(mut self) -> Self {
        self.gumbel = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.policy {
            Policy::Greedy => {}
            Policy::EpsGreedy { epsilon } => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Error::InvalidPolicy(format!(
                        "eps-greedy epsilon must lie in [0, 1], got {epsilon}"
                    )));
                }
            }
            Policy::LilUcb(p) => p.validate()?,
            Policy::Thompson(p) => {
                if !(p.sigma0_sq > 0.0 && p.mu0.is_finite()) {
                    return Err(Error::InvalidPolicy(format!(
                        "Thompson prior needs sigma0_sq > 0, got {p:?}"
                    )));
                }
            }
        }
        if let Some(g) = self.gumbel {
            if !(g.tau > 0.0 && g.tau.is_finite()) {
                return Err(Error::InvalidPolicy(format!(
                    "Gumbel scale must be > 0, got {}",
                    g.tau
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        let base = match self.policy {
            Policy::Greedy => "greedy".to_string(),
            Policy::EpsGreedy { epsilon } => format!("eps_greedy({epsilon})"),
            Policy::LilUcb(_) => "lil_ucb".to_string(),
            Policy::Thompson(_) => "thompson".to_string(),
        };
        match self.gumbel {
            Some(g) => format!("{base}+gumbel({})", g.tau),
            None => base,
        }
    }

    pub fn is_randomized(&self) -> bool {
        self.gumbel.is_some()
    }

    /// Deterministic index `U(mean, n)`; `None` for Thompson Sampling whose
    /// statistics are random draws.
    pub fn index(&self, mean: f64, n: usize) -> Option<f64> {
        match self.policy {
            Policy::Greedy | Policy::EpsGreedy { .. } => Some(mean),
            Policy::LilUcb(p) => Some(mean + p.bonus(n)),
            Policy::Thompson(_) => None,
        }
    }

    /// Decision statistics from per-arm sums and counts (all counts >= 1).
    ///
    /// Thompson Sampling draws one posterior sample per arm from `rng`; the
    /// other policies never touch it.
    pub fn decision_stats<R: Rng + ?Sized>(
        &self,
        sums: &[f64],
        counts: &[usize],
        obs_vars: &[f64],
        rng: &mut R,
    ) -> DecisionStatVector {
        debug_assert!(counts.iter().all(|&n| n > 0));
        let values = match self.policy {
            Policy::Thompson(prior) => sums
                .iter()
                .zip(counts)
                .zip(obs_vars)
                .map(|((&s, &n), &v)| {
                    let (m, var) = prior.posterior(s, n, v);
                    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
                    m + var.sqrt() * z
                })
                .collect(),
            _ => sums
                .iter()
                .zip(counts)
                .map(|(&s, &n)| self.index(s / n as f64, n).expect("deterministic index"))
                .collect(),
        };
        DecisionStatVector(values)
    }

    /// Draws the seed `ω` for one selection among `k` arms.
    pub fn draw_omega<R1, R2>(&self, k: usize, policy_rng: &mut R1, gumbel_rng: &mut R2) -> Omega
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        let uniform = match self.policy {
            Policy::EpsGreedy { .. } => Some(policy_rng.random::<f64>()),
            _ => None,
        };
        let gumbel = self.gumbel.map(|g| {
            let dist = Gumbel::new(-g.tau * EULER_GAMMA, g.tau).expect("valid Gumbel scale");
            (0..k).map(|_| dist.sample(gumbel_rng)).collect()
        });
        Omega { uniform, gumbel }
    }

    /// `f(U, ω)`: the selection with its seed pinned.
    pub fn select_with(&self, stats: &DecisionStatVector, omega: &Omega) -> usize {
        let k = stats.len();
        if let (Policy::EpsGreedy { epsilon }, Some(w)) = (self.policy, omega.uniform) {
            if w < epsilon {
                return (((w / epsilon) * k as f64) as usize).min(k - 1);
            }
        }
        match &omega.gumbel {
            Some(g) => {
                let perturbed: Vec<f64> = stats.0.iter().zip(g).map(|(u, e)| u + e).collect();
                argmax(&perturbed)
            }
            None => argmax(&stats.0),
        }
    }

    /// Draws `ω` and selects.
    pub fn select<R1, R2>(
        &self,
        stats: &DecisionStatVector,
        policy_rng: &mut R1,
        gumbel_rng: &mut R2,
    ) -> (usize, Omega)
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        let omega = self.draw_omega(stats.len(), policy_rng, gumbel_rng);
        (self.select_with(stats, &omega), omega)
    }

    /// Exact `P[f(U) = k | U]` for every arm.
    ///
    /// For Thompson Sampling the statistics are the recorded posterior draws,
    /// so this is the per-round selection law given those draws.
    pub fn selection_distribution(&self, stats: &DecisionStatVector) -> Vec<f64> {
        let k = stats.len();
        let core = match self.gumbel {
            Some(g) => softmax(&stats.0, g.tau),
            None => {
                let mut p = vec![0.0; k];
                p[argmax(&stats.0)] = 1.0;
                p
            }
        };
        match self.policy {
            Policy::EpsGreedy { epsilon } => core
                .into_iter()
                .map(|p| epsilon / k as f64 + (1.0 - epsilon) * p)
                .collect(),
            _ => core,
        }
    }

    pub fn selection_probability(&self, stats: &DecisionStatVector, chosen: usize) -> f64 {
        self.log_selection_probability(stats, chosen).exp()
    }

    /// `log P[f(U) = chosen | U]`, stable for large statistics.
    pub fn log_selection_probability(&self, stats: &DecisionStatVector, chosen: usize) -> f64 {
        let k = stats.len();
        let log_core = match self.gumbel {
            Some(g) => {
                let z: Vec<f64> = stats.0.iter().map(|u| u / g.tau).collect();
                z[chosen] - log_sum_exp(&z)
            }
            None => {
                if argmax(&stats.0) == chosen {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
        match self.policy {
            Policy::EpsGreedy { epsilon } => log_mix(epsilon / k as f64, 1.0 - epsilon, log_core),
            _ => log_core,
        }
    }

    /// Gradient of `log P[f(U) = chosen | U]` with respect to `U`.
    pub fn log_selection_probability_grad(
        &self,
        stats: &DecisionStatVector,
        chosen: usize,
    ) -> Result<Vec<f64>> {
        let g = self.gumbel.ok_or(Error::HardMaxUndifferentiable)?;
        let sm = softmax(&stats.0, g.tau);
        let mut grad: Vec<f64> = sm.iter().map(|p| -p / g.tau).collect();
        grad[chosen] += 1.0 / g.tau;
        if let Policy::EpsGreedy { epsilon } = self.policy {
            // d log(a + b·s) = b·s/(a + b·s) · d log s
            let k = stats.len() as f64;
            let s = sm[chosen];
            let w = (1.0 - epsilon) * s / (epsilon / k + (1.0 - epsilon) * s);
            grad.iter_mut().for_each(|x| *x *= w);
        }
        Ok(grad)
    }
}

/// `log(a + b·exp(log_s))` without overflow, for `a, b >= 0`.
pub(crate) fn log_mix(a: f64, b: f64, log_s: f64) -> f64 {
    if b == 0.0 || log_s == f64::NEG_INFINITY {
        return a.ln();
    }
    if a == 0.0 {
        return b.ln() + log_s;
    }
    let x = b.ln() + log_s;
    let y = a.ln();
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `exp(u_k/τ) / Σ_i exp(u_i/τ)` computed with max subtraction.
pub fn softmax(u: &[f64], tau: f64) -> Vec<f64> {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|x| ((x - m) / tau).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyKind {
    Greedy,
    EpsGreedy,
    LilUcb,
    Thompson,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: Option<PolicyKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma0_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gumbel_tau: Option<f64>,
}

impl TryFrom<RawPolicy> for PolicyConfig {
    type Error = String;

    fn try_from(raw: RawPolicy) -> std::result::Result<Self, String> {
        let kind = raw.kind.ok_or("missing field `kind`")?;
        let reject = |name: &str, present: bool| -> std::result::Result<(), String> {
            if present {
                Err(format!(
                    "field `{name}` does not apply to policy kind {kind:?}"
                ))
            } else {
                Ok(())
            }
        };
        let lil_keys = raw.beta.is_some() || raw.delta.is_some() || raw.alpha.is_some();
        let ts_keys = raw.mu0.is_some() || raw.sigma0_sq.is_some();
        let policy = match kind {
            PolicyKind::Greedy => {
                reject("epsilon", raw.epsilon.is_some())?;
                reject("beta/delta/alpha", lil_keys)?;
                reject("mu0/sigma0_sq", ts_keys)?;
                Policy::Greedy
            }
            PolicyKind::EpsGreedy => {
                reject("beta/delta/alpha", lil_keys)?;
                reject("mu0/sigma0_sq", ts_keys)?;
                Policy::EpsGreedy {
                    epsilon: raw.epsilon.unwrap_or(0.1),
                }
            }
            PolicyKind::LilUcb => {
                reject("mu0/sigma0_sq", ts_keys)?;
                let d = LilUcbParams::default();
                Policy::LilUcb(LilUcbParams {
                    beta: raw.beta.unwrap_or(d.beta),
                    epsilon: raw.epsilon.unwrap_or(d.epsilon),
                    delta: raw.delta.unwrap_or(d.delta),
                    alpha: raw.alpha.unwrap_or(d.alpha),
                })
            }
            PolicyKind::Thompson => {
                reject("epsilon", raw.epsilon.is_some())?;
                reject("beta/delta/alpha", lil_keys)?;
                let d = ThompsonPrior::default();
                Policy::Thompson(ThompsonPrior {
                    mu0: raw.mu0.unwrap_or(d.mu0),
                    sigma0_sq: raw.sigma0_sq.unwrap_or(d.sigma0_sq),
                })
            }
        };
        let config = PolicyConfig {
            policy,
            gumbel: raw.gumbel_tau.map(|tau| GumbelNoise { tau }),
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

impl From<PolicyConfig> for RawPolicy {
    fn from(c: PolicyConfig) -> Self {
        let mut raw = RawPolicy {
            gumbel_tau: c.gumbel.map(|g| g.tau),
            ..Default::default()
        };
        match c.policy {
            Policy::Greedy => raw.kind = Some(PolicyKind::Greedy),
            Policy::EpsGreedy { epsilon } => {
                raw.kind = Some(PolicyKind::EpsGreedy);
                raw.epsilon = Some(epsilon);
            }
            Policy::LilUcb(p) => {
                raw.kind = Some(PolicyKind::LilUcb);
                raw.beta = Some(p.beta);
                raw.epsilon = Some(p.epsilon);
                raw.delta = Some(p.delta);
                raw.alpha = Some(p.alpha);
            }
            Policy::Thompson(p) => {
                raw.kind = Some(PolicyKind::Thompson);
                raw.mu0 = Some(p.mu0);
                raw.sigma0_sq = Some(p.sigma0_sq);
            }
        }
        raw
    }
}
