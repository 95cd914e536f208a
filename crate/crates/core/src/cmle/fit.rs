//! Persistent contrastive-divergence fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream};
use crate::trace::Trace;

use super::sampler::Chain;
use super::CmleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmleResult {
    /// Fitted means; the tail average of the trajectory.
    pub theta: Vec<f64>,
    /// `θ_0` (the sample means) followed by every iterate.
    pub trajectory: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    /// Norm of the last stochastic gradient estimate.
    pub final_grad_norm: f64,
    pub config: CmleConfig,
}

impl CmleResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Fits with the trace's own MCMC stream: master seed `config.seed`, trial
/// index from the trace's seed (0 for traces that carry none).
pub fn cd_fit(trace: &Trace, config: &CmleConfig) -> Result<CmleResult> {
    let trial = trace.seed.map_or(0, |s| s.trial_index);
    let mut rng = RngStream::new(config.seed, trial, Purpose::Mcmc);
    cd_fit_with_rng(trace, config, &mut rng)
}

/// Runs `n_gd_iters` updates
/// `θ ← θ + η (∇ log h_θ(X_obs) - (1/R) Σ_r ∇ log h_θ(X'_r))`,
/// where the `X'_r` are states of a chain that persists across iterations
/// and starts at the observed data.
pub fn cd_fit_with_rng(
    trace: &Trace,
    config: &CmleConfig,
    rng: &mut RngStream,
) -> Result<CmleResult> {
    cd_fit_from(trace, config, &trace.final_means(), rng)
}

/// Like [`cd_fit_with_rng`] but starting from `theta0` instead of the
/// sample means.
pub fn cd_fit_from(
    trace: &Trace,
    config: &CmleConfig,
    theta0: &[f64],
    rng: &mut RngStream,
) -> Result<CmleResult> {
    let mut chain = Chain::new(trace, config)?;
    let k = trace.num_arms();
    if theta0.len() != k {
        return Err(Error::InvalidCmleConfig(format!(
            "theta0 has {} entries for {k} arms",
            theta0.len()
        )));
    }
    let observed = trace.final_means();
    let counts = trace.final_counts();
    let mut theta = theta0.to_vec();
    let mut trajectory = Vec::with_capacity(config.n_gd_iters + 1);
    trajectory.push(theta.clone());
    let mut grad_norm = 0.0;

    for iteration in 1..=config.n_gd_iters {
        for _ in 0..config.burn_in {
            chain.sweep(&theta, rng);
        }
        let mut chain_means = vec![0.0; k];
        for _ in 0..config.samples_per_grad {
            chain.sweep(&theta, rng);
            for (acc, m) in chain_means.iter_mut().zip(chain.sweep_means()) {
                *acc += m;
            }
        }
        let r = config.samples_per_grad as f64;
        let mut sq = 0.0;
        for a in 0..k {
            // The θ terms of the two gradients cancel.
            let diff = observed[a] - chain_means[a] / r;
            let grad = counts[a] as f64 * diff / trace.arms[a].variance();
            sq += grad * grad;
            theta[a] += if config.precondition {
                config.eta * diff
            } else {
                config.eta * grad
            };
        }
        grad_norm = sq.sqrt();
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm <= config.divergence_bound) {
            return Err(Error::Divergence { iteration, norm });
        }
        trajectory.push(theta.clone());
    }

    let n = config.n_gd_iters;
    let tail = ((n as f64 * config.tail_average).floor() as usize)
        .max(1)
        .min(n.max(1));
    let estimate = if n == 0 {
        theta
    } else {
        let window = &trajectory[n + 1 - tail..];
        (0..k)
            .map(|a| window.iter().map(|t| t[a]).sum::<f64>() / window.len() as f64)
            .collect()
    };
    Ok(CmleResult {
        theta: estimate,
        trajectory,
        acceptance_rate: chain.acceptance_rate(),
        final_grad_norm: grad_norm,
        config: *config,
    })
}
