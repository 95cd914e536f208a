//! Collection trials, Monte Carlo campaigns and the exact Bernoulli oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmModel, Family};
use crate::error::{Error, Result};
use crate::policy::{DecisionStatVector, Policy, PolicyConfig};
use crate::rng::{Purpose, TrialSeed};
use crate::stats::{pearson, ErrorAccumulator, ErrorSummary};
use crate::trace::{Trace, TRACE_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOptions {
    /// Draw a held-out twin from the selected arm every round.
    pub split: bool,
}

fn validate_setup(arms: &[ArmModel], policy: &PolicyConfig, horizon: usize) -> Result<()> {
    if arms.len() < 2 {
        return Err(Error::InvalidArm(format!(
            "need at least 2 arms, got {}",
            arms.len()
        )));
    }
    for arm in arms {
        arm.validate()?;
    }
    policy.validate()?;
    if horizon < arms.len() {
        return Err(Error::InvalidTrace(format!(
            "horizon {horizon} shorter than arm count {}",
            arms.len()
        )));
    }
    if matches!(policy.policy, Policy::Thompson(_))
        && arms.iter().any(|a| a.family != Family::Gaussian)
    {
        return Err(Error::InvalidPolicy(
            "Thompson Sampling is implemented for Gaussian arms only".into(),
        ));
    }
    Ok(())
}

/// Runs one collection trial of `horizon` rounds.
///
/// Rounds `1..=K` sample each arm once in order; later rounds follow the
/// policy. Each purpose draws from its own stream of `seed`, so a trace can
/// be regenerated from `trace.seed`.
pub fn run_trial(
    arms: &[ArmModel],
    policy: &PolicyConfig,
    horizon: usize,
    seed: TrialSeed,
    options: TrialOptions,
) -> Result<Trace> {
    validate_setup(arms, policy, horizon)?;
    let k = arms.len();
    let mut arm_rng = seed.stream(Purpose::ArmDraw);
    let mut noise_rng = seed.stream(Purpose::PolicyNoise);
    let mut gumbel_rng = seed.stream(Purpose::GumbelNoise);
    let mut held_rng = seed.stream(Purpose::HeldOut);

    let obs_vars: Vec<f64> = arms.iter().map(ArmModel::variance).collect();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut samples = vec![Vec::new(); k];
    let mut held_out = options.split.then(|| vec![Vec::new(); k]);
    let mut selections = Vec::with_capacity(horizon);
    let rounds = horizon - k;
    let mut decision_stats: Vec<DecisionStatVector> = Vec::with_capacity(rounds);
    let mut uniforms = matches!(policy.policy, Policy::EpsGreedy { .. }).then(Vec::new);
    let mut gumbels = policy.gumbel.map(|_| Vec::with_capacity(rounds));

    for t in 0..horizon {
        let arm = if t < k {
            t
        } else {
            let stats = policy.decision_stats(&sums, &counts, &obs_vars, &mut noise_rng);
            let (s, omega) = policy.select(&stats, &mut noise_rng, &mut gumbel_rng);
            decision_stats.push(stats);
            if let (Some(u), Some(w)) = (uniforms.as_mut(), omega.uniform) {
                u.push(w);
            }
            if let (Some(g), Some(draws)) = (gumbels.as_mut(), omega.gumbel) {
                g.push(draws);
            }
            s
        };
        let x = arms[arm].draw(&mut arm_rng);
        sums[arm] += x;
        counts[arm] += 1;
        samples[arm].push(x);
        selections.push(arm);
        if let Some(h) = held_out.as_mut() {
            h[arm].push(arms[arm].draw(&mut held_rng));
        }
    }

    Ok(Trace {
        schema_version: TRACE_SCHEMA_VERSION,
        arms: arms.to_vec(),
        policy: *policy,
        horizon,
        seed: Some(seed),
        selections,
        samples,
        decision_stats,
        explore_uniforms: uniforms,
        gumbel_draws: gumbels,
        held_out,
        estimates: Default::default(),
    })
}

/// Regenerates a simulated trace from its recorded seed.
pub fn replay(trace: &Trace) -> Result<Trace> {
    let seed = trace
        .seed
        .ok_or_else(|| Error::InvalidTrace("trace carries no seed".into()))?;
    run_trial(
        &trace.arms,
        &trace.policy,
        trace.horizon,
        seed,
        TrialOptions {
            split: trace.is_split(),
        },
    )
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Maps `f` over trial indices in parallel, returning results in index order.
pub fn map_trials<T: Send>(n_trials: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n_trials as u64).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub arms: Vec<ArmModel>,
    pub policy: PolicyConfig,
    pub horizon: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Rounds at which to aggregate; defaults to `[horizon]` when empty.
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointReport {
    pub round: usize,
    pub arms: Vec<ErrorSummary>,
    pub pooled: ErrorSummary,
    /// `joint_bias[m]`: fraction of trials in which exactly `m` arms have
    /// strictly negative error `X̄ - μ`.
    pub joint_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: CampaignConfig,
    pub checkpoints: Vec<CheckpointReport>,
}

impl ExperimentReport {
    pub fn at(&self, round: usize) -> Option<&CheckpointReport> {
        self.checkpoints.iter().find(|c| c.round == round)
    }

    pub fn last(&self) -> &CheckpointReport {
        self.checkpoints.last().expect("at least one checkpoint")
    }
}

/// Sample-mean errors `X̄_t^(k) - μ_k` at each checkpoint; `None` where the
/// arm has no samples yet.
pub fn checkpoint_errors(trace: &Trace, checkpoints: &[usize]) -> Vec<Vec<Option<f64>>> {
    let k = trace.num_arms();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut next = 0;
    let mut order: Vec<usize> = (0..checkpoints.len()).collect();
    order.sort_by_key(|&i| checkpoints[i]);
    let mut results = vec![Vec::new(); checkpoints.len()];
    for t in 0..=trace.horizon {
        while next < order.len() && checkpoints[order[next]] == t {
            results[order[next]] = (0..k)
                .map(|a| (counts[a] > 0).then(|| sums[a] / counts[a] as f64 - trace.arms[a].mean))
                .collect();
            next += 1;
        }
        if t == trace.horizon {
            break;
        }
        let s = trace.selections[t];
        sums[s] += trace.samples[s][counts[s]];
        counts[s] += 1;
    }
    out.extend(results);
    out
}

/// Fractions of trials with exactly `m` negatively biased arms, `m = 0..=K`.
pub fn joint_bias_fractions(errors: &[Vec<Option<f64>>], k: usize) -> Vec<f64> {
    let mut hist = vec![0usize; k + 1];
    for e in errors {
        let m = e
            .iter()
            .filter(|x| matches!(x, Some(v) if *v < 0.0))
            .count();
        hist[m] += 1;
    }
    let n = errors.len() as f64;
    hist.into_iter().map(|c| c as f64 / n).collect()
}

/// Runs independent trials and aggregates bias, MSE and joint-bias
/// frequencies at each checkpoint. Results are reduced in trial order, so
/// they do not depend on the number of worker threads.
pub fn run_campaign(config: &CampaignConfig) -> Result<ExperimentReport> {
    validate_setup(&config.arms, &config.policy, config.horizon)?;
    if config.n_trials == 0 {
        return Err(Error::InvalidTrace(
            "campaign needs at least one trial".into(),
        ));
    }
    let mut checkpoints = config.checkpoints.clone();
    if checkpoints.is_empty() {
        checkpoints.push(config.horizon);
    }
    if let Some(&bad) = checkpoints.iter().find(|&&c| c == 0 || c > config.horizon) {
        return Err(Error::InvalidTrace(format!(
            "checkpoint {bad} outside 1..={}",
            config.horizon
        )));
    }
    let per_trial: Vec<Result<Vec<Vec<Option<f64>>>>> = map_trials(config.n_trials, |i| {
        let trace = run_trial(
            &config.arms,
            &config.policy,
            config.horizon,
            TrialSeed::new(config.master_seed, i),
            TrialOptions::default(),
        )?;
        Ok(checkpoint_errors(&trace, &checkpoints))
    });
    let per_trial: Vec<Vec<Vec<Option<f64>>>> = per_trial.into_iter().collect::<Result<_>>()?;

    let k = config.arms.len();
    let reports = checkpoints
        .iter()
        .enumerate()
        .map(|(ci, &round)| {
            let mut acc = ErrorAccumulator::new(k);
            let errs: Vec<Vec<Option<f64>>> = per_trial.iter().map(|t| t[ci].clone()).collect();
            errs.iter().for_each(|e| acc.push(e));
            CheckpointReport {
                round,
                arms: acc.arms(),
                pooled: acc.pooled(),
                joint_bias: joint_bias_fractions(&errs, k),
            }
        })
        .collect();
    Ok(ExperimentReport {
        config: CampaignConfig {
            checkpoints,
            ..config.clone()
        },
        checkpoints: reports,
    })
}

/// Largest horizon accepted by [`enumerate_bernoulli_exact`].
pub const MAX_EXACT_HORIZON: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactBias {
    pub bias1: f64,
    pub bias2: f64,
}

/// Exact bias of both sample means for two Bernoulli arms at horizon `T`,
/// by dynamic programming over `(N^(1), S^(1), S^(2))` with exact path
/// probabilities. Works for any non-Thompson policy; the selection law of
/// each round is taken from [`PolicyConfig::selection_distribution`].
pub fn enumerate_bernoulli_exact(
    mu1: f64,
    mu2: f64,
    policy: &PolicyConfig,
    horizon: usize,
) -> Result<ExactBias> {
    if horizon > MAX_EXACT_HORIZON {
        return Err(Error::StateSpaceTooLarge {
            requested: horizon,
            max: MAX_EXACT_HORIZON,
        });
    }
    let arms = [ArmModel::bernoulli(mu1)?, ArmModel::bernoulli(mu2)?];
    validate_setup(&arms, policy, horizon.max(2))?;
    if matches!(policy.policy, Policy::Thompson(_)) {
        return Err(Error::InvalidPolicy(
            "exact enumeration needs a deterministic decision index".into(),
        ));
    }
    if horizon < 2 {
        return Err(Error::InvalidTrace("horizon must be at least 2".into()));
    }
    let mu = [mu1, mu2];
    let dim = horizon + 1;
    // prob[n1][s1][s2] for the current round, with n2 = t - n1.
    let idx = |n1: usize, s1: usize, s2: usize| (n1 * dim + s1) * dim + s2;
    let mut prob = vec![0.0; dim * dim * dim];
    // After the warm-up rounds: one sample from each arm.
    for (s1, p1) in [(0, 1.0 - mu1), (1, mu1)] {
        for (s2, p2) in [(0, 1.0 - mu2), (1, mu2)] {
            prob[idx(1, s1, s2)] += p1 * p2;
        }
    }
    for t in 2..horizon {
        let mut next = vec![0.0; dim * dim * dim];
        for n1 in 1..t {
            let n2 = t - n1;
            for s1 in 0..=n1 {
                for s2 in 0..=n2 {
                    let p = prob[idx(n1, s1, s2)];
                    if p == 0.0 {
                        continue;
                    }
                    let stats = DecisionStatVector(vec![
                        policy.index(s1 as f64 / n1 as f64, n1).unwrap(),
                        policy.index(s2 as f64 / n2 as f64, n2).unwrap(),
                    ]);
                    let law = policy.selection_distribution(&stats);
                    for (arm, &q) in law.iter().enumerate() {
                        if q == 0.0 {
                            continue;
                        }
                        for (x, px) in [(0, 1.0 - mu[arm]), (1, mu[arm])] {
                            let w = p * q * px;
                            if arm == 0 {
                                next[idx(n1 + 1, s1 + x, s2)] += w;
                            } else {
                                next[idx(n1, s1, s2 + x)] += w;
                            }
                        }
                    }
                }
            }
        }
        prob = next;
    }
    let (mut e1, mut e2) = (0.0, 0.0);
    for n1 in 1..horizon {
        let n2 = horizon - n1;
        for s1 in 0..=n1 {
            for s2 in 0..=n2 {
                let p = prob[idx(n1, s1, s2)];
                e1 += p * s1 as f64 / n1 as f64;
                e2 += p * s2 as f64 / n2 as f64;
            }
        }
    }
    Ok(ExactBias {
        bias1: e1 - mu1,
        bias2: e2 - mu2,
    })
}

/// Closed-form Greedy biases at `T = 3` for two Bernoulli arms.
pub fn bernoulli_t3_closed_form(mu1: f64, mu2: f64) -> ExactBias {
    ExactBias {
        bias1: -0.5 * mu1 * (1.0 - mu1) * mu2,
        bias2: -0.5 * mu2 * (1.0 - mu2) * (1.0 - mu1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub trial: u64,
    /// `X̄^(1) - μ_1` at the snapshot round.
    pub bias_at_snapshot: f64,
    /// Samples drawn from arm 1 in rounds `snapshot+1..=T`.
    pub future_count: usize,
}

/// One point per trial relating arm 1's bias at `snapshot` to how often it
/// is sampled afterwards.
pub fn future_samples_scatter(
    arms: &[ArmModel],
    policy: &PolicyConfig,
    snapshot: usize,
    horizon: usize,
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<ScatterPoint>> {
    if snapshot >= horizon || snapshot < arms.len() {
        return Err(Error::InvalidTrace(format!(
            "snapshot {snapshot} must lie in [K, T) = [{}, {horizon})",
            arms.len()
        )));
    }
    let points: Vec<Result<ScatterPoint>> = map_trials(n_trials, |i| {
        let trace = run_trial(
            arms,
            policy,
            horizon,
            TrialSeed::new(master_seed, i),
            TrialOptions::default(),
        )?;
        let before = trace.counts_at(snapshot)[0];
        Ok(ScatterPoint {
            trial: i,
            bias_at_snapshot: trace.sample_mean(0, snapshot)? - arms[0].mean,
            future_count: trace.final_counts()[0] - before,
        })
    });
    points.into_iter().collect()
}

pub fn scatter_correlation(points: &[ScatterPoint]) -> f64 {
    let x: Vec<f64> = points.iter().map(|p| p.bias_at_snapshot).collect();
    let y: Vec<f64> = points.iter().map(|p| p.future_count as f64).collect();
    pearson(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn greedy() -> PolicyConfig {
        PolicyConfig::new(Policy::Greedy)
    }

    fn gaussians(means: &[f64]) -> Vec<ArmModel> {
        means
            .iter()
            .map(|&m| ArmModel::gaussian(m, 1.0).unwrap())
            .collect()
    }

    #[test]
    fn deterministic_arms_force_the_path() {
        let arms = [
            ArmModel::bernoulli(1.0).unwrap(),
            ArmModel::bernoulli(0.0).unwrap(),
        ];
        let t = run_trial(
            &arms,
            &greedy(),
            3,
            TrialSeed::new(0, 0),
            Default::default(),
        )
        .unwrap();
        assert_eq!(t.selections, vec![0, 1, 0]);
        assert_eq!(t.samples[0], vec![1.0, 1.0]);
        t.validate().unwrap();
    }

    #[test]
    fn split_records_one_twin_per_round() {
        let arms = gaussians(&[1.0, 0.5, 0.0]);
        let t = run_trial(
            &arms,
            &greedy(),
            10,
            TrialSeed::new(3, 1),
            TrialOptions { split: true },
        )
        .unwrap();
        let held = t.held_out.as_ref().unwrap();
        assert_eq!(held.iter().map(Vec::len).sum::<usize>(), 10);
        for (h, s) in held.iter().zip(&t.samples) {
            assert_eq!(h.len(), s.len());
        }
        t.validate().unwrap();
    }

    #[test]
    fn replay_reproduces_trace() {
        let arms = gaussians(&[1.0, 0.75]);
        for policy in [
            greedy().with_gumbel(1.0),
            PolicyConfig::new(Policy::EpsGreedy { epsilon: 0.2 }),
            PolicyConfig::new(Policy::Thompson(Default::default())).with_gumbel(0.5),
        ] {
            let t = run_trial(
                &arms,
                &policy,
                25,
                TrialSeed::new(8, 2),
                TrialOptions { split: true },
            )
            .unwrap();
            assert_eq!(replay(&t).unwrap(), t);
        }
    }

    #[test]
    fn counts_sum_to_round() {
        let arms = gaussians(&[0.2, 0.1, 0.4]);
        let policy = PolicyConfig::new(Policy::LilUcb(Default::default()));
        let t = run_trial(&arms, &policy, 40, TrialSeed::new(1, 0), Default::default()).unwrap();
        for r in 0..=40 {
            assert_eq!(t.counts_at(r).iter().sum::<usize>(), r);
        }
    }

    #[test]
    fn point_masses_have_zero_bias() {
        let arms = [
            ArmModel::bernoulli(1.0).unwrap(),
            ArmModel::bernoulli(0.0).unwrap(),
        ];
        let report = run_campaign(&CampaignConfig {
            arms: arms.to_vec(),
            policy: PolicyConfig::new(Policy::EpsGreedy { epsilon: 0.3 }),
            horizon: 30,
            n_trials: 50,
            master_seed: 1,
            checkpoints: vec![],
        })
        .unwrap();
        let last = report.last();
        for a in &last.arms {
            assert_eq!(a.bias, 0.0);
        }
        assert_eq!(last.joint_bias, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn early_checkpoints_exclude_unsampled_arms() {
        let report = run_campaign(&CampaignConfig {
            arms: gaussians(&[0.0, 0.0, 0.0]),
            policy: greedy(),
            horizon: 6,
            n_trials: 20,
            master_seed: 4,
            checkpoints: vec![1, 6],
        })
        .unwrap();
        let first = report.at(1).unwrap();
        assert_eq!(first.arms[0].trials, 20);
        assert_eq!(first.arms[2].excluded, 20);
        assert_eq!(first.pooled.trials, 0);
        assert!((first.joint_bias.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = CampaignConfig {
            arms: gaussians(&[0.0, 1.0]),
            policy: greedy(),
            horizon: 5,
            n_trials: 0,
            master_seed: 0,
            checkpoints: vec![],
        };
        assert!(run_campaign(&cfg).is_err());
    }

    #[test]
    fn exact_bernoulli_reference_points() {
        let b = enumerate_bernoulli_exact(0.5, 0.5, &greedy(), 3).unwrap();
        assert!((b.bias1 + 0.0625).abs() < 1e-15);
        assert!((b.bias2 + 0.0625).abs() < 1e-15);

        let b = enumerate_bernoulli_exact(0.8, 0.4, &greedy(), 3).unwrap();
        assert!((b.bias1 + 0.032).abs() < 1e-15);
        assert!((b.bias2 + 0.024).abs() < 1e-15);
        assert!((b.bias1 / b.bias2 - 0.8 / 0.6).abs() < 1e-12);

        for mu1 in [0.0, 0.3, 0.9, 1.0] {
            let b = enumerate_bernoulli_exact(mu1, 0.0, &greedy(), 3).unwrap();
            assert!(b.bias1.abs() < 1e-15);
        }
    }

    #[test]
    fn exact_enumeration_caps_horizon() {
        assert!(matches!(
            enumerate_bernoulli_exact(0.5, 0.5, &greedy(), MAX_EXACT_HORIZON + 1),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn exact_enumeration_matches_brute_force_paths() {
        // Brute force over every outcome string for T = 6: each round's
        // outcome is a Bernoulli flip for the selected arm.
        let (mu1, mu2, horizon) = (0.35, 0.6, 6);
        let mut e = [0.0; 2];
        for bits in 0u32..(1 << horizon) {
            let mut sums = [0.0; 2];
            let mut n = [0usize; 2];
            let mut p = 1.0;
            for t in 0..horizon {
                let arm = if t < 2 {
                    t
                } else if sums[0] / n[0] as f64 >= sums[1] / n[1] as f64 {
                    0
                } else {
                    1
                };
                let x = (bits >> t) & 1;
                let mu = if arm == 0 { mu1 } else { mu2 };
                p *= if x == 1 { mu } else { 1.0 - mu };
                sums[arm] += x as f64;
                n[arm] += 1;
            }
            e[0] += p * sums[0] / n[0] as f64;
            e[1] += p * sums[1] / n[1] as f64;
        }
        let b = enumerate_bernoulli_exact(mu1, mu2, &greedy(), horizon).unwrap();
        assert!((b.bias1 - (e[0] - mu1)).abs() < 1e-14);
        assert!((b.bias2 - (e[1] - mu2)).abs() < 1e-14);
    }

    #[test]
    fn scatter_dominant_arm_takes_all_future_rounds() {
        let arms = gaussians(&[0.0, -1e6]);
        let pts = future_samples_scatter(&arms, &greedy(), 10, 50, 5, 3).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|p| p.future_count == 40));
        let one = future_samples_scatter(&arms, &greedy(), 10, 50, 1, 3).unwrap();
        assert_eq!(one.len(), 1);
    }
}
