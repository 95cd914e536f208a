//! The unnormalized conditional log-likelihood and its gradients.

use crate::arm::{gaussian_log_density, ArmModel};
use crate::error::{Error, Result};
use crate::policy::{Policy, ThompsonPrior};
use crate::trace::Trace;

use super::{model_for, round_log_prob, CmleConfig, Model};

/// `Σ_k Σ_m log N(X_m^(k); θ_k, σ_k²)`.
pub fn data_term(samples: &[Vec<f64>], theta: &[f64], arms: &[ArmModel]) -> f64 {
    samples
        .iter()
        .zip(theta)
        .zip(arms)
        .map(|((xs, &t), a)| {
            xs.iter()
                .map(|&x| gaussian_log_density(x, t, a.obs_std))
                .sum::<f64>()
        })
        .sum()
}

/// `∂/∂θ_k = Σ_m (X_m^(k) - θ_k) / σ_k²`.
pub fn data_term_gradient(samples: &[Vec<f64>], theta: &[f64], arms: &[ArmModel]) -> Vec<f64> {
    samples
        .iter()
        .zip(theta)
        .zip(arms)
        .map(|((xs, &t), a)| xs.iter().map(|x| x - t).sum::<f64>() / a.variance())
        .collect()
}

/// Per-arm running sums and counts after each round `t = K..T-1`, flattened
/// round-major with stride `K`.
pub(crate) fn round_sums(trace: &Trace, samples: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let k = trace.num_arms();
    let rounds = trace.policy_rounds();
    let mut sums = Vec::with_capacity(rounds * k);
    let mut counts = Vec::with_capacity(rounds * k);
    let mut s = vec![0.0; k];
    let mut n = vec![0usize; k];
    for (t, &arm) in trace.selections.iter().enumerate().take(trace.horizon - 1) {
        s[arm] += samples[arm][n[arm]];
        n[arm] += 1;
        if t + 1 >= k {
            sums.extend_from_slice(&s);
            counts.extend_from_slice(&n);
        }
    }
    (sums, counts)
}

/// Decision statistics recomputed from candidate samples, round-major.
pub(crate) fn index_stats(trace: &Trace, samples: &[Vec<f64>]) -> Vec<f64> {
    let (sums, counts) = round_sums(trace, samples);
    sums.iter()
        .zip(&counts)
        .map(|(&s, &n)| {
            trace
                .policy
                .index(s / n as f64, n)
                .expect("deterministic index")
        })
        .collect()
}

/// Posterior means and variances after each round, round-major.
pub(crate) fn posterior_params(
    trace: &Trace,
    samples: &[Vec<f64>],
    prior: &ThompsonPrior,
) -> (Vec<f64>, Vec<f64>) {
    let k = trace.num_arms();
    let (sums, counts) = round_sums(trace, samples);
    let mut means = Vec::with_capacity(sums.len());
    let mut vars = Vec::with_capacity(sums.len());
    for (i, (&s, &n)) in sums.iter().zip(&counts).enumerate() {
        let (m, v) = prior.posterior(s, n, trace.arms[i % k].variance());
        means.push(m);
        vars.push(v);
    }
    (means, vars)
}

fn selection_terms(trace: &Trace, stats: &[f64], tau: f64, mix: Option<(f64, f64)>) -> f64 {
    let k = trace.num_arms();
    stats
        .chunks(k)
        .enumerate()
        .map(|(j, u)| round_log_prob(u, trace.selections[k + j], tau, mix))
        .sum()
}

pub(crate) fn index_loglik(
    trace: &Trace,
    samples: &[Vec<f64>],
    theta: &[f64],
    tau: f64,
    mix: Option<(f64, f64)>,
) -> f64 {
    data_term(samples, theta, &trace.arms)
        + selection_terms(trace, &index_stats(trace, samples), tau, mix)
}

/// `log h_θ(X) + Σ_{t=K}^{T-1} log P[f(U_t) = s_{t+1} | U_t]`, with `U_t`
/// recomputed from the trace's samples. Thompson traces are delegated to
/// [`thompson_conditional_loglik`].
pub fn conditional_loglik_unnormalized(
    trace: &Trace,
    theta: &[f64],
    config: &CmleConfig,
) -> Result<f64> {
    check_theta(trace, theta)?;
    match model_for(trace, config)? {
        Model::Index { mix } => Ok(index_loglik(trace, &trace.samples, theta, config.tau, mix)),
        Model::Thompson(_) => thompson_conditional_loglik(trace, theta, config),
    }
}

fn check_theta(trace: &Trace, theta: &[f64]) -> Result<()> {
    if theta.len() != trace.num_arms() {
        return Err(Error::InvalidCmleConfig(format!(
            "theta has {} entries for {} arms",
            theta.len(),
            trace.num_arms()
        )));
    }
    Ok(())
}

fn thompson_prior(trace: &Trace) -> Result<ThompsonPrior> {
    match trace.policy.policy {
        Policy::Thompson(p) => Ok(p),
        _ => Err(Error::MissingPosteriorDraws),
    }
}

pub(crate) fn phi_terms(trace: &Trace, samples: &[Vec<f64>], prior: &ThompsonPrior) -> f64 {
    let (means, vars) = posterior_params(trace, samples, prior);
    trace
        .decision_stats
        .iter()
        .flat_map(|d| d.0.iter())
        .zip(means.iter().zip(&vars))
        .map(|(&d, (&m, &v))| gaussian_log_density(d, m, v.sqrt()))
        .sum()
}

/// `Σ_t Σ_k log φ` of the recorded posterior draws around the posterior
/// means implied by the trace's samples.
pub fn thompson_phi_terms(trace: &Trace) -> Result<f64> {
    let prior = thompson_prior(trace)?;
    Ok(phi_terms(trace, &trace.samples, &prior))
}

/// Gradient of [`thompson_phi_terms`] with respect to every sample value.
///
/// A sample of arm `k` enters the posterior mean of every later round with
/// weight `v_t / σ_k²`, so its derivative is `Σ_t (μ̂_t - m_t) / σ_k²`.
pub fn thompson_phi_gradient(trace: &Trace) -> Result<Vec<Vec<f64>>> {
    let prior = thompson_prior(trace)?;
    let k = trace.num_arms();
    let (means, _) = posterior_params(trace, &trace.samples, &prior);
    let rounds = trace.policy_rounds();
    // suffix[j][a]: Σ_{j' >= j} (μ̂ - m) for arm a.
    let mut suffix = vec![0.0; (rounds + 1) * k];
    for j in (0..rounds).rev() {
        for a in 0..k {
            suffix[j * k + a] =
                suffix[(j + 1) * k + a] + trace.decision_stats[j].0[a] - means[j * k + a];
        }
    }
    Ok((0..k)
        .map(|a| {
            let var = trace.arms[a].variance();
            trace
                .arrival_rounds(a)
                .into_iter()
                .map(|r| suffix[first_round(r, k) * k + a] / var)
                .collect()
        })
        .collect())
}

/// First policy round (0-based) whose statistics include a sample that
/// arrived at round `r` (1-based).
pub(crate) fn first_round(r: usize, k: usize) -> usize {
    r.saturating_sub(k)
}

/// The Thompson objective: data term, `φ` terms of the recorded posterior
/// draws, and the Gumbel softmax terms over those draws.
///
/// The posterior means inside `φ` are computed from the samples, not from
/// `θ`, so the `φ` terms are `θ`-free and the `θ`-gradient is the data
/// term's.
pub fn thompson_conditional_loglik(
    trace: &Trace,
    theta: &[f64],
    config: &CmleConfig,
) -> Result<f64> {
    check_theta(trace, theta)?;
    let prior = thompson_prior(trace)?;
    model_for(trace, config)?;
    let draws: Vec<f64> = trace
        .decision_stats
        .iter()
        .flat_map(|d| d.0.clone())
        .collect();
    Ok(data_term(&trace.samples, theta, &trace.arms)
        + phi_terms(trace, &trace.samples, &prior)
        + selection_terms(trace, &draws, config.tau, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmle::tests::{single_arm_trace, trace_for};
    use crate::policy::{LilUcbParams, PolicyConfig};

    fn cfg() -> CmleConfig {
        CmleConfig::default()
    }

    #[test]
    fn recomputed_stats_match_recorded() {
        for policy in [
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            PolicyConfig::new(Policy::LilUcb(LilUcbParams::default())).with_gumbel(1.0),
            PolicyConfig::new(Policy::EpsGreedy { epsilon: 0.1 }).with_gumbel(1.0),
        ] {
            let t = trace_for(policy, &[1.0, 0.75, 0.5], 20, 3);
            let u = index_stats(&t, &t.samples);
            let recorded: Vec<f64> = t.decision_stats.iter().flat_map(|d| d.0.clone()).collect();
            assert_eq!(u.len(), recorded.len());
            for (a, b) in u.iter().zip(&recorded) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_arm_reduces_to_gaussian_loglik() {
        let xs = [0.3, 1.4, -0.2, 0.9, 0.5];
        let t = single_arm_trace(&xs, PolicyConfig::new(Policy::Greedy).with_gumbel(1.0));
        for theta in [-1.0, 0.0, 0.58, 2.0] {
            let ll = conditional_loglik_unnormalized(&t, &[theta], &cfg()).unwrap();
            let plain: f64 = xs
                .iter()
                .map(|&x| gaussian_log_density(x, theta, 1.0))
                .sum();
            assert!((ll - plain).abs() < 1e-12);
        }
        let g = data_term_gradient(&t.samples, &[0.58], &t.arms);
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for policy in [
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            PolicyConfig::new(Policy::LilUcb(LilUcbParams::default())).with_gumbel(1.0),
            PolicyConfig::new(Policy::EpsGreedy { epsilon: 0.1 }).with_gumbel(1.0),
        ] {
            let t = trace_for(policy, &[1.0, 0.75], 16, 5);
            let theta = [0.8, 0.6];
            let g = data_term_gradient(&t.samples, &theta, &t.arms);
            for k in 0..2 {
                let h = 1e-5;
                let mut up = theta;
                let mut dn = theta;
                up[k] += h;
                dn[k] -= h;
                let fd = (conditional_loglik_unnormalized(&t, &up, &cfg()).unwrap()
                    - conditional_loglik_unnormalized(&t, &dn, &cfg()).unwrap())
                    / (2.0 * h);
                assert!(((fd - g[k]) / g[k]).abs() < 1e-6, "{fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn infinite_temperature_flattens_selection_terms() {
        let tau = 1e6;
        let t = trace_for(
            PolicyConfig::new(Policy::Greedy).with_gumbel(tau),
            &[1.0, 0.75],
            12,
            1,
        );
        let c = CmleConfig { tau, ..cfg() };
        let theta = [0.7, 0.2];
        let ll = conditional_loglik_unnormalized(&t, &theta, &c).unwrap();
        // Each softmax term is within |ΔU|/(2τ) of log(1/2).
        let flat = data_term(&t.samples, &theta, &t.arms) + 10.0 * (0.5f64).ln();
        assert!((ll - flat).abs() < 1e-4);
        let g = data_term_gradient(&t.samples, &theta, &t.arms);
        for k in 0..2 {
            let h = 1e-4;
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd = (conditional_loglik_unnormalized(&t, &up, &c).unwrap()
                - conditional_loglik_unnormalized(&t, &dn, &c).unwrap())
                / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn selection_terms_shift_invariant() {
        let t = trace_for(
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            &[1.0, 0.75],
            12,
            2,
        );
        let u = index_stats(&t, &t.samples);
        let shifted: Vec<f64> = u.iter().map(|x| x + 123.4).collect();
        let a = selection_terms(&t, &u, 1.0, None);
        let b = selection_terms(&t, &shifted, 1.0, None);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn thompson_requires_posterior_draws() {
        let t = trace_for(
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            &[1.0, 0.75],
            8,
            0,
        );
        assert_eq!(thompson_phi_terms(&t), Err(Error::MissingPosteriorDraws));
        assert_eq!(
            thompson_conditional_loglik(&t, &[0.0, 0.0], &cfg()),
            Err(Error::MissingPosteriorDraws)
        );
    }

    #[test]
    fn thompson_phi_gradient_matches_central_differences() {
        let policy = PolicyConfig::new(Policy::Thompson(ThompsonPrior::default())).with_gumbel(1.0);
        let t = trace_for(policy, &[1.0, 0.75], 24, 4);
        let g = thompson_phi_gradient(&t).unwrap();
        for a in 0..2 {
            for m in 0..t.samples[a].len() {
                let h = 1e-4;
                let mut up = t.clone();
                let mut dn = t.clone();
                up.samples[a][m] += h;
                dn.samples[a][m] -= h;
                let fd = (thompson_phi_terms(&up).unwrap() - thompson_phi_terms(&dn).unwrap())
                    / (2.0 * h);
                let scale = g[a][m].abs().max(1e-3);
                assert!(
                    ((fd - g[a][m]) / scale).abs() < 1e-5,
                    "{a},{m}: {fd} vs {}",
                    g[a][m]
                );
            }
        }
    }

    #[test]
    fn thompson_theta_gradient_is_the_data_term() {
        let policy = PolicyConfig::new(Policy::Thompson(ThompsonPrior::default())).with_gumbel(1.0);
        let t = trace_for(policy, &[1.0, 0.75], 24, 6);
        let theta = [0.5, 0.9];
        let g = data_term_gradient(&t.samples, &theta, &t.arms);
        for k in 0..2 {
            let h = 1e-5;
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd = (thompson_conditional_loglik(&t, &up, &cfg()).unwrap()
                - thompson_conditional_loglik(&t, &dn, &cfg()).unwrap())
                / (2.0 * h);
            assert!(((fd - g[k]) / g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn thompson_flat_prior_single_arm_is_gaussian() {
        let xs = [0.4, -0.3, 1.1, 0.2];
        let prior = ThompsonPrior {
            mu0: 0.0,
            sigma0_sq: 1e8,
        };
        let policy = PolicyConfig::new(Policy::Thompson(prior)).with_gumbel(1.0);
        let mut t = single_arm_trace(&xs, policy);
        // Put each recorded draw at its posterior mean so the φ terms are
        // the log normalizers alone.
        let (means, vars) = posterior_params(&t, &t.samples, &prior);
        for (d, m) in t.decision_stats.iter_mut().zip(&means) {
            d.0[0] = *m;
        }
        let theta = [0.3];
        let ll = thompson_conditional_loglik(&t, &theta, &cfg()).unwrap();
        let gauss: f64 = xs.iter().map(|&x| gaussian_log_density(x, 0.3, 1.0)).sum();
        let norm: f64 = vars
            .iter()
            .map(|v| gaussian_log_density(0.0, 0.0, v.sqrt()))
            .sum();
        assert!((ll - gauss - norm).abs() < 1e-6);
        // The running means approach the flat-prior posterior means.
        for (j, m) in means.iter().enumerate() {
            let sample_mean = xs[..=j].iter().sum::<f64>() / (j + 1) as f64;
            assert!((m - sample_mean).abs() < 1e-6);
        }
    }
}
