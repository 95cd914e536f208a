//! Conditional maximum likelihood estimation of the arm means.
//!
//! The likelihood of the observed samples is conditioned on the selection
//! sequence: `h_θ(X) · Π_t P[f(U_t) = s_{t+1} | U_t]`, with `U_t` recomputed
//! from `X`. Its normalizer is never computed. Instead the fit runs
//! persistent contrastive divergence, estimating the normalizer's gradient
//! with a Metropolis-within-Gibbs chain over the latent sample values.
//!
//! Only Gaussian arms with known `obs_std` are supported, and the trace must
//! have been collected with Gumbel randomization: under a hard argmax the
//! selection terms are indicators and the objective has no useful gradient.

mod fit;
mod objective;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::arm::Family;
use crate::error::{Error, Result};
use crate::policy::{Policy, ThompsonPrior};
use crate::trace::Trace;

pub use fit::{cd_fit, cd_fit_from, cd_fit_with_rng, CmleResult};
pub use objective::{
    conditional_loglik_unnormalized, data_term, data_term_gradient, thompson_conditional_loglik,
    thompson_phi_gradient, thompson_phi_terms,
};
pub use sampler::{mh_step, Chain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Proposal {
    /// Redraw the site from `N(θ_k, σ_k²)`; the data density cancels and
    /// only the selection terms enter the acceptance ratio.
    Independence,
    /// Perturb the site by `N(0, std²)`.
    RandomWalk { std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmleConfig {
    /// Gumbel scale used at collection; must match the trace.
    pub tau: f64,
    pub eta: f64,
    /// Scale each arm's step by `σ_k² / N_k`, so the update becomes
    /// `θ_k += η (X̄_obs - X̄_chain)`. Without it the raw gradient is used
    /// and `eta` should be of order `σ² / T`.
    pub precondition: bool,
    pub n_gd_iters: usize,
    /// Sweeps discarded at the start of every iteration.
    pub burn_in: usize,
    /// Sweeps averaged into every gradient estimate (`R`).
    pub samples_per_grad: usize,
    /// Random-scan sweeps of this many sites instead of full sweeps.
    pub sites_per_sweep: Option<usize>,
    pub proposal: Proposal,
    /// Fraction of the trajectory's tail averaged into the estimate; 0
    /// reports the last iterate.
    pub tail_average: f64,
    /// `‖θ‖` above which the fit stops with `Divergence`.
    pub divergence_bound: f64,
    /// Master seed of the MCMC stream; the trial index comes from the trace.
    pub seed: u64,
}

impl Default for CmleConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            eta: 0.01,
            precondition: true,
            n_gd_iters: 600,
            burn_in: 2,
            samples_per_grad: 10,
            sites_per_sweep: None,
            proposal: Proposal::Independence,
            tail_average: 0.5,
            divergence_bound: 1e6,
            seed: 0,
        }
    }
}

impl CmleConfig {
    /// The chain settings used for Thompson Sampling: 3000 iterations of
    /// 30 sweeps, half of them burn-in.
    pub fn thompson() -> Self {
        Self {
            n_gd_iters: 3000,
            burn_in: 15,
            samples_per_grad: 15,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidCmleConfig(m.into()));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be > 0");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be > 0");
        }
        if self.samples_per_grad == 0 {
            return bad("samples_per_grad must be >= 1");
        }
        if self.sites_per_sweep == Some(0) {
            return bad("sites_per_sweep must be >= 1");
        }
        if let Proposal::RandomWalk { std } = self.proposal {
            if !(std > 0.0 && std.is_finite()) {
                return bad("random-walk std must be > 0");
            }
        }
        if !(0.0..1.0).contains(&self.tail_average) {
            return bad("tail_average must lie in [0, 1)");
        }
        if !(self.divergence_bound > 0.0) {
            return bad("divergence_bound must be > 0");
        }
        Ok(())
    }
}

/// What the selection terms of a trace are computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Model {
    /// `U_t = index(X̄_t, N_t)`; `mix` is ε-Greedy's `(ε/K, 1-ε)`.
    Index { mix: Option<(f64, f64)> },
    /// `U_t` are posterior draws, latent alongside the samples.
    Thompson(ThompsonPrior),
}

/// Checks that `trace` can be fitted with `config` and classifies it.
pub(crate) fn model_for(trace: &Trace, config: &CmleConfig) -> Result<Model> {
    config.validate()?;
    trace.validate()?;
    if let Some(arm) = trace.arms.iter().position(|a| a.family != Family::Gaussian) {
        return Err(Error::InvalidArm(format!(
            "arm {arm}: conditional MLE supports Gaussian arms only"
        )));
    }
    let g = trace.policy.gumbel.ok_or(Error::HardMaxTrace)?;
    if (g.tau - config.tau).abs() > 1e-12 * g.tau.max(config.tau) {
        return Err(Error::InvalidCmleConfig(format!(
            "tau {} does not match the trace's Gumbel scale {}",
            config.tau, g.tau
        )));
    }
    let k = trace.num_arms() as f64;
    Ok(match trace.policy.policy {
        Policy::EpsGreedy { epsilon } => Model::Index {
            mix: Some((epsilon / k, 1.0 - epsilon)),
        },
        Policy::Thompson(prior) => Model::Thompson(prior),
        Policy::Greedy | Policy::LilUcb(_) => Model::Index { mix: None },
    })
}

/// `log P[f(U) = chosen | U]` under Gumbel softmax at scale `tau`, mixed
/// with uniform exploration when `mix` is set. Allocation free.
#[inline]
pub(crate) fn round_log_prob(u: &[f64], chosen: usize, tau: f64, mix: Option<(f64, f64)>) -> f64 {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = u.iter().map(|x| ((x - m) / tau).exp()).sum();
    let core = (u[chosen] - m) / tau - s.ln();
    match mix {
        Some((a, b)) => crate::policy::log_mix(a, b, core),
        None => core,
    }
}
