//! Metropolis-within-Gibbs over the latent data of a trace.
//!
//! The chain targets the conditional density `h_θ(X') Π_t P[s_{t+1} | U_t(X')]`
//! with the selection sequence held fixed, so every state has the trace's
//! per-arm counts. Moving sample `m` of arm `k` by `d` moves `U_t^(k)` by
//! `d / N_t^(k)` in every round whose statistics include it, which lets a
//! site update touch only those rounds.
//!
//! For Thompson Sampling the posterior draws `μ̂_t^(k)` are latent too. A
//! sample move shifts the posterior means of later rounds, which changes
//! the `φ` terms only; a draw move changes one round's softmax only.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::arm::gaussian_log_density;
use crate::error::Result;
use crate::policy::ThompsonPrior;
use crate::rng::RngStream;
use crate::trace::Trace;

use super::objective::{first_round, index_stats, posterior_params};
use super::{model_for, round_log_prob, CmleConfig, Model, Proposal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Site {
    Sample { arm: usize, idx: usize },
    Draw { round: usize, arm: usize },
}

/// A persistent chain over the latent data of one trace.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    trace: &'a Trace,
    model: Model,
    tau: f64,
    proposal: Proposal,
    sites_per_sweep: Option<usize>,
    k: usize,
    rounds: usize,
    samples: Vec<Vec<f64>>,
    first: Vec<Vec<usize>>,
    chosen: Vec<usize>,
    counts: Vec<usize>,
    /// `U_t` for index policies, the posterior draws for Thompson.
    stats: Vec<f64>,
    /// Thompson: the log softmax term of every round.
    lp: Vec<f64>,
    /// Index policies: per round a reference `r_t` (the max at the last
    /// refresh), the terms `exp((U_t - r_t)/τ)` and their sum.
    reference: Vec<f64>,
    terms: Vec<f64>,
    term_sum: Vec<f64>,
    post_mean: Vec<f64>,
    post_var: Vec<f64>,
    /// Candidate term and sum per round; NaN marks a round to rebuild.
    scratch_term: Vec<f64>,
    scratch_sum: Vec<f64>,
    /// Per-site estimates of `E[X_m^(k)]` for the current sweep.
    contrib: Vec<Vec<f64>>,
    sites: Vec<Site>,
    proposed: u64,
    accepted: u64,
}

impl<'a> Chain<'a> {
    /// Starts the chain at the observed data.
    pub fn new(trace: &'a Trace, config: &CmleConfig) -> Result<Self> {
        Self::with_samples(trace, config, trace.samples.clone())
    }

    /// Starts the chain at `samples`, which must match the trace's counts.
    pub fn with_samples(
        trace: &'a Trace,
        config: &CmleConfig,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let model = model_for(trace, config)?;
        if samples.len() != trace.num_arms()
            || samples
                .iter()
                .zip(&trace.samples)
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(crate::Error::InvalidTrace(
                "chain state must have the trace's per-arm counts".into(),
            ));
        }
        let k = trace.num_arms();
        let rounds = trace.policy_rounds();
        let first = (0..k)
            .map(|a| {
                trace
                    .arrival_rounds(a)
                    .into_iter()
                    .map(|r| first_round(r, k))
                    .collect()
            })
            .collect();
        let (_, counts) = super::objective::round_sums(trace, &samples);
        let mut sites: Vec<Site> = (0..k)
            .flat_map(|arm| (0..samples[arm].len()).map(move |idx| Site::Sample { arm, idx }))
            .collect();
        let stats = match model {
            Model::Index { .. } => Vec::new(),
            Model::Thompson(_) => {
                sites.extend(
                    (0..rounds).flat_map(|round| (0..k).map(move |arm| Site::Draw { round, arm })),
                );
                trace
                    .decision_stats
                    .iter()
                    .flat_map(|d| d.0.clone())
                    .collect()
            }
        };
        let mut chain = Self {
            trace,
            model,
            tau: config.tau,
            proposal: config.proposal,
            sites_per_sweep: config.sites_per_sweep,
            k,
            rounds,
            samples: samples.clone(),
            first,
            chosen: trace.selections[k..].to_vec(),
            counts,
            stats,
            lp: vec![0.0; rounds],
            reference: vec![0.0; rounds],
            terms: vec![0.0; rounds * k],
            term_sum: vec![0.0; rounds],
            post_mean: Vec::new(),
            post_var: Vec::new(),
            scratch_term: vec![0.0; rounds],
            scratch_sum: vec![0.0; rounds],
            contrib: samples.clone(),
            sites,
            proposed: 0,
            accepted: 0,
        };
        chain.refresh();
        Ok(chain)
    }

    /// Recomputes every cached quantity from the current state, clearing
    /// rounding drift from incremental updates.
    fn refresh(&mut self) {
        match self.model {
            Model::Index { .. } => self.stats = index_stats(self.trace, &self.samples),
            Model::Thompson(prior) => {
                let (m, v) = posterior_params(self.trace, &self.samples, &prior);
                self.post_mean = m;
                self.post_var = v;
            }
        }
        for j in 0..self.rounds {
            match self.model {
                Model::Index { .. } => self.rebuild_round(j),
                Model::Thompson(_) => {
                    let u = &self.stats[j * self.k..(j + 1) * self.k];
                    self.lp[j] = round_log_prob(u, self.chosen[j], self.tau, None);
                }
            }
        }
    }

    fn rebuild_round(&mut self, j: usize) {
        let u = &self.stats[j * self.k..(j + 1) * self.k];
        let r = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let terms = &mut self.terms[j * self.k..(j + 1) * self.k];
        let mut sum = 0.0;
        for (e, x) in terms.iter_mut().zip(u) {
            *e = ((x - r) / self.tau).exp();
            sum += *e;
        }
        self.reference[j] = r;
        self.term_sum[j] = sum;
    }

    /// `log P[s_{t+1} | U_t]` of index-policy round `j` from the caches.
    fn cached_log_prob(&self, j: usize) -> f64 {
        let i = j * self.k + self.chosen[j];
        let core = (self.stats[i] - self.reference[j]) / self.tau - self.term_sum[j].ln();
        match self.mix() {
            Some((a, b)) => crate::policy::log_mix(a, b, core),
            None => core,
        }
    }

    fn mix(&self) -> Option<(f64, f64)> {
        match self.model {
            Model::Index { mix } => mix,
            Model::Thompson(_) => None,
        }
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Current posterior draws (Thompson) or decision statistics, one
    /// vector per policy round.
    pub fn stats(&self) -> Vec<Vec<f64>> {
        self.stats.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    pub fn arm_means(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect()
    }

    /// Per-arm estimates of `E[X̄^(k)]` from the last sweep.
    ///
    /// Each updated site contributes the expected post-update value given
    /// the proposal, `a·y + (1-a)·x`. Under the independence proposal the
    /// zero-mean control variate `y - θ_k` is subtracted, which leaves
    /// `θ_k + (1-a)(x - y)`: exact when selection is flat. Sites not
    /// visited contribute their current value.
    pub fn sweep_means(&self) -> Vec<f64> {
        self.contrib
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// Log selection-factor ratio for moving sample `idx` of `arm` to
    /// `value`: the softmax terms for index policies, the `φ` terms for
    /// Thompson. The data density is not included. Index policies leave
    /// the candidate round terms in `scratch`.
    pub fn log_ratio_sample(&mut self, arm: usize, idx: usize, value: f64) -> f64 {
        let d = value - self.samples[arm][idx];
        let j0 = self.first[arm][idx];
        let k = self.k;
        match self.model {
            Model::Index { mix } => {
                // Selection probabilities change by the factor
                // `p'/p`, multiplied up and logged only when the product
                // nears the range limits. A round whose terms underflow or
                // overflow is evaluated exactly instead.
                let tau = self.tau;
                let (mut log_total, mut prod) = (0.0, 1.0);
                let (mut last_n, mut factor) = (0, 1.0);
                for j in j0..self.rounds {
                    let n = self.counts[j * k + arm];
                    if n != last_n {
                        last_n = n;
                        factor = (d / (n as f64 * tau)).exp();
                    }
                    let base = j * k;
                    let c = self.chosen[j];
                    let old_term = self.terms[base + arm];
                    let new_term = old_term * factor;
                    let sum = self.term_sum[j];
                    // Summed afresh: an incremental sum keeps the absolute
                    // rounding error of a term that has since shrunk.
                    let new_sum: f64 = self.terms[base..base + k]
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| if i == arm { new_term } else { e })
                        .sum();
                    let p_old = self.terms[base + c] / sum;
                    let p_new = if c == arm {
                        new_term
                    } else {
                        self.terms[base + c]
                    } / new_sum;
                    if new_term.is_normal()
                        && p_old.is_normal()
                        && p_new.is_normal()
                        && new_sum.is_finite()
                    {
                        prod *= match mix {
                            Some((a, b)) => (a + b * p_new) / (a + b * p_old),
                            None => p_new / p_old,
                        };
                        if !(1e-150..=1e150).contains(&prod) {
                            log_total += prod.ln();
                            prod = 1.0;
                        }
                        self.scratch_term[j] = new_term;
                        self.scratch_sum[j] = new_sum;
                    } else {
                        let u = &mut self.stats[base..base + k];
                        let old = u[arm];
                        let before = round_log_prob(u, c, tau, mix);
                        u[arm] = old + d / n as f64;
                        let after = round_log_prob(u, c, tau, mix);
                        u[arm] = old;
                        log_total += after - before;
                        self.scratch_term[j] = f64::NAN;
                    }
                }
                log_total + prod.ln()
            }
            Model::Thompson(_) => {
                // Σ_j [(μ̂ - m) d/σ² - v d²/(2σ⁴)], the change of Σ log φ
                // when every later posterior mean moves by v d/σ².
                let var = self.trace.arms[arm].variance();
                let (mut lin, mut quad) = (0.0, 0.0);
                for j in j0..self.rounds {
                    let i = j * k + arm;
                    lin += self.stats[i] - self.post_mean[i];
                    quad += self.post_var[i];
                }
                lin * d / var - quad * d * d / (2.0 * var * var)
            }
        }
    }

    fn apply_sample(&mut self, arm: usize, idx: usize, value: f64) {
        let d = value - self.samples[arm][idx];
        let j0 = self.first[arm][idx];
        let k = self.k;
        match self.model {
            Model::Index { .. } => {
                for j in j0..self.rounds {
                    let i = j * k + arm;
                    self.stats[i] += d / self.counts[i] as f64;
                    if self.scratch_term[j].is_nan() {
                        self.rebuild_round(j);
                    } else {
                        self.terms[i] = self.scratch_term[j];
                        self.term_sum[j] = self.scratch_sum[j];
                    }
                }
            }
            Model::Thompson(_) => {
                let var = self.trace.arms[arm].variance();
                for j in j0..self.rounds {
                    let i = j * k + arm;
                    self.post_mean[i] += self.post_var[i] * d / var;
                }
            }
        }
        self.samples[arm][idx] = value;
    }

    /// Moves sample `idx` of `arm` to `value` unconditionally.
    pub fn set_sample(&mut self, arm: usize, idx: usize, value: f64) {
        self.log_ratio_sample(arm, idx, value);
        self.apply_sample(arm, idx, value);
    }

    fn update(&mut self, site: Site, theta: &[f64], rng: &mut RngStream) {
        self.proposed += 1;
        match site {
            Site::Sample { arm, idx } => {
                let std = self.trace.arms[arm].obs_std;
                let z: f64 = rng.sample(StandardNormal);
                let current = self.samples[arm][idx];
                let (value, prior) = match self.proposal {
                    Proposal::Independence => (theta[arm] + std * z, 0.0),
                    Proposal::RandomWalk { std: step } => {
                        let v = current + step * z;
                        let p = gaussian_log_density(v, theta[arm], std)
                            - gaussian_log_density(current, theta[arm], std);
                        (v, p)
                    }
                };
                let log_alpha = prior + self.log_ratio_sample(arm, idx, value);
                let a = log_alpha.min(0.0).exp();
                self.contrib[arm][idx] = match self.proposal {
                    Proposal::Independence => theta[arm] + (1.0 - a) * (current - value),
                    Proposal::RandomWalk { .. } => a * value + (1.0 - a) * current,
                };
                if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
                    self.apply_sample(arm, idx, value);
                    self.accepted += 1;
                }
            }
            Site::Draw { round, arm } => {
                // Independence proposal from the draw's own conditional
                // `N(m, v)`, so only the round's softmax term remains.
                let i = round * self.k + arm;
                let z: f64 = rng.sample(StandardNormal);
                let value = self.post_mean[i] + self.post_var[i].sqrt() * z;
                let u = &mut self.stats[round * self.k..(round + 1) * self.k];
                let old = u[arm];
                u[arm] = value;
                let lp = round_log_prob(u, self.chosen[round], self.tau, None);
                let log_alpha = lp - self.lp[round];
                if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
                    self.lp[round] = lp;
                    self.accepted += 1;
                } else {
                    self.stats[i] = old;
                }
            }
        }
    }

    /// One sweep: every latent site once in a fixed order, or
    /// `sites_per_sweep` sites drawn uniformly at random.
    pub fn sweep(&mut self, theta: &[f64], rng: &mut RngStream) {
        self.refresh();
        if self.sites_per_sweep.is_some() {
            self.contrib.clone_from(&self.samples);
        }
        match self.sites_per_sweep {
            None => {
                for i in 0..self.sites.len() {
                    self.update(self.sites[i], theta, rng);
                }
            }
            Some(n) => {
                for _ in 0..n {
                    let site = self.sites[rng.random_range(0..self.sites.len())];
                    self.update(site, theta, rng);
                }
            }
        }
    }

    /// Unnormalized log density of the current state at `theta`.
    pub fn log_target(&self, theta: &[f64]) -> f64 {
        let data = super::objective::data_term(&self.samples, theta, &self.trace.arms);
        match self.model {
            Model::Index { .. } => {
                data + (0..self.rounds)
                    .map(|j| self.cached_log_prob(j))
                    .sum::<f64>()
            }
            Model::Thompson(_) => {
                let phi: f64 = self
                    .stats
                    .iter()
                    .zip(self.post_mean.iter().zip(&self.post_var))
                    .map(|(&d, (&m, &v))| gaussian_log_density(d, m, v.sqrt()))
                    .sum();
                data + phi + self.lp.iter().sum::<f64>()
            }
        }
    }

    pub fn prior(&self) -> Option<ThompsonPrior> {
        match self.model {
            Model::Thompson(p) => Some(p),
            Model::Index { .. } => None,
        }
    }
}

/// One full sweep from `samples`, returning the new samples.
pub fn mh_step(
    trace: &Trace,
    samples: Vec<Vec<f64>>,
    theta: &[f64],
    config: &CmleConfig,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    let mut chain = Chain::with_samples(trace, config, samples)?;
    chain.sweep(theta, rng);
    Ok(chain.samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmle::objective::conditional_loglik_unnormalized;
    use crate::cmle::tests::trace_for;
    use crate::policy::{LilUcbParams, Policy, PolicyConfig};
    use crate::rng::Purpose;
    use crate::stats::Running;

    fn cfg() -> CmleConfig {
        CmleConfig::default()
    }

    #[test]
    fn incremental_caches_match_a_full_recompute() {
        for policy in [
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            PolicyConfig::new(Policy::LilUcb(LilUcbParams::default())).with_gumbel(1.0),
            PolicyConfig::new(Policy::EpsGreedy { epsilon: 0.1 }).with_gumbel(1.0),
            PolicyConfig::new(Policy::Thompson(Default::default())).with_gumbel(1.0),
        ] {
            let t = trace_for(policy, &[1.0, 0.75, 0.5], 20, 9);
            let mut chain = Chain::new(&t, &cfg()).unwrap();
            let mut rng = RngStream::new(1, 0, Purpose::Mcmc);
            let theta = [0.9, 0.7, 0.4];
            for _ in 0..5 {
                for i in 0..chain.sites.len() {
                    chain.update(chain.sites[i], &theta, &mut rng);
                }
            }
            let incremental = chain.log_target(&theta);
            chain.refresh();
            assert!((incremental - chain.log_target(&theta)).abs() < 1e-9);
        }
    }

    #[test]
    fn small_tau_caches_survive_underflow() {
        // At τ = 0.02 most terms underflow and single moves swing whole
        // rounds, so the exact fallback carries most updates.
        for policy in [
            PolicyConfig::new(Policy::Greedy).with_gumbel(0.02),
            PolicyConfig::new(Policy::EpsGreedy { epsilon: 0.2 }).with_gumbel(0.02),
        ] {
            let t = trace_for(policy, &[1.0, 0.75, 0.5], 30, 4);
            let c = CmleConfig { tau: 0.02, ..cfg() };
            let mut chain = Chain::new(&t, &c).unwrap();
            let mut rng = RngStream::new(8, 0, Purpose::Mcmc);
            let theta = [1.0, 0.75, 0.5];
            for _ in 0..20 {
                for i in 0..chain.sites.len() {
                    chain.update(chain.sites[i], &theta, &mut rng);
                }
                let incremental = chain.log_target(&theta);
                assert!(incremental.is_finite());
                let mut fresh = chain.clone();
                fresh.refresh();
                let f = fresh.log_target(&theta);
                assert!((incremental - f).abs() < 1e-8, "{incremental} vs {f}");
            }
        }
    }

    #[test]
    fn log_target_matches_objective() {
        let t = trace_for(
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            &[1.0, 0.75],
            12,
            3,
        );
        let chain = Chain::new(&t, &cfg()).unwrap();
        let theta = [0.2, 0.4];
        let a = chain.log_target(&theta);
        let b = conditional_loglik_unnormalized(&t, &theta, &cfg()).unwrap();
        assert!((a - b).abs() < 1e-10);

        let t = trace_for(
            PolicyConfig::new(Policy::Thompson(Default::default())).with_gumbel(1.0),
            &[1.0, 0.75],
            12,
            3,
        );
        let chain = Chain::new(&t, &cfg()).unwrap();
        let b = crate::cmle::thompson_conditional_loglik(&t, &theta, &cfg()).unwrap();
        assert!((chain.log_target(&theta) - b).abs() < 1e-10);
    }

    #[test]
    fn sweeps_preserve_counts_and_selections() {
        let t = trace_for(
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            &[1.0, 0.75],
            16,
            1,
        );
        let mut rng = RngStream::new(2, 0, Purpose::Mcmc);
        let s = mh_step(&t, t.samples.clone(), &[1.0, 0.75], &cfg(), &mut rng).unwrap();
        assert_eq!(s.iter().map(Vec::len).collect::<Vec<_>>(), t.final_counts());
        assert_ne!(s, t.samples);
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let tau = 1e6;
        let t = trace_for(
            PolicyConfig::new(Policy::Greedy).with_gumbel(tau),
            &[1.0, 0.75],
            16,
            2,
        );
        let c = CmleConfig { tau, ..cfg() };
        let mut chain = Chain::new(&t, &c).unwrap();
        let mut rng = RngStream::new(3, 0, Purpose::Mcmc);
        for _ in 0..200 {
            chain.sweep(&[1.0, 0.75], &mut rng);
        }
        assert!(
            chain.acceptance_rate() > 0.999,
            "{}",
            chain.acceptance_rate()
        );
    }

    /// Discretize one site to three values with proposal weights
    /// proportional to `N(v; θ, σ²)`. The target is taken from the
    /// objective function; the transition probabilities from the sampler.
    fn detailed_balance_gap(t: &Trace, arm: usize, idx: usize) -> f64 {
        let theta: Vec<f64> = t.arms.iter().map(|a| a.mean).collect();
        let values = [-0.7, 0.4, 1.9];
        let q: Vec<f64> = values
            .iter()
            .map(|&v| gaussian_log_density(v, theta[arm], 1.0).exp())
            .collect();
        let qsum: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|x| x / qsum).collect();
        let log_pi: Vec<f64> = values
            .iter()
            .map(|&v| {
                let mut tt = t.clone();
                tt.samples[arm][idx] = v;
                match t.policy.policy {
                    Policy::Thompson(_) => {
                        crate::cmle::thompson_conditional_loglik(&tt, &theta, &cfg()).unwrap()
                    }
                    _ => conditional_loglik_unnormalized(&tt, &theta, &cfg()).unwrap(),
                }
            })
            .collect();
        let m = log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = log_pi.iter().map(|l| (l - m).exp()).sum();
        let pi: Vec<f64> = log_pi.iter().map(|l| (l - m).exp() / z).collect();

        let mut p = [[0.0; 3]; 3];
        for i in 0..3 {
            let mut chain = Chain::new(t, &cfg()).unwrap();
            chain.set_sample(arm, idx, values[i]);
            for j in 0..3 {
                if i != j {
                    let r = chain.log_ratio_sample(arm, idx, values[j]);
                    p[i][j] = q[j] * r.exp().min(1.0);
                }
            }
            p[i][i] = 1.0 - p[i].iter().sum::<f64>();
        }
        let mut gap: f64 = 0.0;
        for i in 0..3 {
            assert!((p[i].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..3 {
                gap = gap.max((pi[i] * p[i][j] - pi[j] * p[j][i]).abs());
            }
        }
        gap
    }

    #[test]
    fn detailed_balance_on_three_state_toy() {
        for policy in [
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            PolicyConfig::new(Policy::EpsGreedy { epsilon: 0.1 }).with_gumbel(1.0),
            PolicyConfig::new(Policy::LilUcb(LilUcbParams::default())).with_gumbel(1.0),
            PolicyConfig::new(Policy::Thompson(Default::default())).with_gumbel(1.0),
        ] {
            let t = trace_for(policy, &[1.0, 0.75], 6, 0);
            for arm in 0..2 {
                assert!(detailed_balance_gap(&t, arm, 0) < 1e-10);
            }
        }
    }

    /// Exact draws from the conditional density by rejection: the selection
    /// factor is a probability, so draw `X ~ h_θ` and keep it with that
    /// probability.
    fn rejection_draw(t: &Trace, theta: &[f64], rng: &mut RngStream) -> Vec<Vec<f64>> {
        let counts = t.final_counts();
        let mix = match t.policy.policy {
            Policy::EpsGreedy { epsilon } => Some((epsilon / 2.0, 1.0 - epsilon)),
            _ => None,
        };
        loop {
            let samples: Vec<Vec<f64>> = counts
                .iter()
                .zip(theta)
                .map(|(&n, &m)| {
                    (0..n)
                        .map(|_| m + rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            let u = index_stats(t, &samples);
            let log_sel: f64 = u
                .chunks(2)
                .enumerate()
                .map(|(j, u)| round_log_prob(u, t.selections[2 + j], 1.0, mix))
                .sum();
            if rng.random::<f64>().ln() < log_sel {
                return samples;
            }
        }
    }

    #[test]
    fn chain_agrees_with_rejection_sampler() {
        let t = trace_for(
            PolicyConfig::new(Policy::Greedy).with_gumbel(1.0),
            &[1.0, 0.75],
            4,
            5,
        );
        let theta = [1.0, 0.75];
        let mut rng = RngStream::new(10, 0, Purpose::Mcmc);
        let sites: Vec<(usize, usize)> = (0..2)
            .flat_map(|a| (0..t.samples[a].len()).map(move |m| (a, m)))
            .collect();

        let n_exact = 100_000;
        let mut exact = vec![Running::default(); sites.len()];
        for _ in 0..n_exact {
            let s = rejection_draw(&t, &theta, &mut rng);
            for (i, &(a, m)) in sites.iter().enumerate() {
                exact[i].push(s[a][m]);
            }
        }

        let start = rejection_draw(&t, &theta, &mut rng);
        let mut chain = Chain::with_samples(&t, &cfg(), start).unwrap();
        // Batch means over 100 batches of 100 sweeps absorb autocorrelation.
        let mut batches = vec![Running::default(); sites.len()];
        for _ in 0..100 {
            let mut acc = vec![0.0; sites.len()];
            for _ in 0..100 {
                chain.sweep(&theta, &mut rng);
                for (i, &(a, m)) in sites.iter().enumerate() {
                    acc[i] += chain.samples()[a][m];
                }
            }
            for (b, x) in batches.iter_mut().zip(acc) {
                b.push(x / 100.0);
            }
        }
        for i in 0..sites.len() {
            let se = (exact[i].se().powi(2) + batches[i].se().powi(2)).sqrt();
            let gap = (exact[i].mean() - batches[i].mean()).abs();
            assert!(
                gap < 4.0 * se,
                "site {:?}: {} vs {} (se {se})",
                sites[i],
                exact[i].mean(),
                batches[i].mean()
            );
        }
    }
}
