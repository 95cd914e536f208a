use adabias::estimators::{naive_estimate, propensity_estimate};
use adabias::simulate::{
    enumerate_bernoulli_exact, replay, run_campaign, run_trial, with_threads, CampaignConfig,
    TrialOptions,
};
use adabias::{ArmModel, LilUcbParams, Policy, PolicyConfig, ThompsonPrior, Trace, TrialSeed};
use proptest::prelude::*;

fn policy_strategy() -> impl Strategy<Value = PolicyConfig> {
    let base = prop_oneof![
        Just(Policy::Greedy),
        (0.0..1.0f64).prop_map(|epsilon| Policy::EpsGreedy { epsilon }),
        Just(Policy::LilUcb(LilUcbParams::default())),
        Just(Policy::Thompson(ThompsonPrior::default())),
    ];
    (base, prop::option::of(0.1..3.0f64)).prop_map(|(p, tau)| {
        let c = PolicyConfig::new(p);
        match tau {
            Some(t) => c.with_gumbel(t),
            None => c,
        }
    })
}

fn arms_strategy() -> impl Strategy<Value = Vec<ArmModel>> {
    prop::collection::vec(-2.0..2.0f64, 2..5).prop_map(|m| {
        m.into_iter()
            .map(|x| ArmModel::gaussian(x, 1.0).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn traces_are_valid_and_replayable(
        arms in arms_strategy(),
        policy in policy_strategy(),
        extra in 0usize..30,
        seed in any::<u64>(),
        split in any::<bool>(),
    ) {
        let k = arms.len();
        let horizon = k + extra;
        let t = run_trial(&arms, &policy, horizon, TrialSeed::new(seed, 3), TrialOptions { split }).unwrap();
        t.validate().unwrap();
        prop_assert_eq!(&t.selections[..k], &(0..k).collect::<Vec<_>>()[..]);
        let counts = t.final_counts();
        prop_assert_eq!(counts.iter().sum::<usize>(), horizon);
        prop_assert!(counts.iter().all(|&n| n >= 1));
        prop_assert_eq!(&replay(&t).unwrap(), &t);
        let back = Trace::from_json(&t.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn selection_laws_are_distributions(
        stats in prop::collection::vec(-50.0..50.0f64, 2..6),
        policy in policy_strategy(),
    ) {
        let p = policy.selection_distribution(&adabias::DecisionStatVector(stats.clone()));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        if let Policy::EpsGreedy { epsilon } = policy.policy {
            let floor = epsilon / stats.len() as f64;
            prop_assert!(p.iter().all(|&x| x >= floor - 1e-15));
        }
        for (k, &pk) in p.iter().enumerate() {
            let lp = policy.log_selection_probability(&adabias::DecisionStatVector(stats.clone()), k);
            prop_assert!((lp.exp() - pk).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_bias_is_never_positive(
        mu1 in 0.0..=1.0f64,
        mu2 in 0.0..=1.0f64,
        horizon in 2usize..9,
        which in 0usize..3,
    ) {
        let policy = PolicyConfig::new(match which {
            0 => Policy::Greedy,
            1 => Policy::EpsGreedy { epsilon: 0.2 },
            _ => Policy::LilUcb(LilUcbParams::default()),
        });
        let b = enumerate_bernoulli_exact(mu1, mu2, &policy, horizon).unwrap();
        prop_assert!(b.bias1 <= 1e-14 && b.bias2 <= 1e-14, "{:?}", b);
    }

    #[test]
    fn propensity_weights_are_finite_under_noise(
        arms in arms_strategy(),
        policy in policy_strategy(),
        seed in any::<u64>(),
    ) {
        let policy = policy.with_gumbel(1.0);
        let t = run_trial(&arms, &policy, arms.len() + 12, TrialSeed::new(seed, 0), TrialOptions::default()).unwrap();
        let p = propensity_estimate(&t).unwrap();
        prop_assert!(p.estimates.iter().all(|e| e.is_some_and(f64::is_finite)));
        prop_assert_eq!(naive_estimate(&t).counts, t.final_counts());
    }
}

#[test]
fn campaigns_do_not_depend_on_the_thread_count() {
    let config = CampaignConfig {
        arms: vec![
            ArmModel::gaussian(1.0, 1.0).unwrap(),
            ArmModel::gaussian(0.5, 1.0).unwrap(),
            ArmModel::gaussian(0.0, 1.0).unwrap(),
        ],
        policy: PolicyConfig::new(Policy::Thompson(ThompsonPrior::default())),
        horizon: 40,
        n_trials: 300,
        master_seed: 5,
        checkpoints: vec![3, 10, 40],
    };
    let one = with_threads(1, || run_campaign(&config).unwrap());
    let many = with_threads(4, || run_campaign(&config).unwrap());
    assert_eq!(one.checkpoints, many.checkpoints);
    for cp in &one.checkpoints {
        assert!((cp.joint_bias.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn greedy_two_arms_matches_exact_enumeration() {
    let (mu1, mu2, horizon) = (0.6, 0.4, 8);
    let policy = PolicyConfig::new(Policy::Greedy);
    let exact = enumerate_bernoulli_exact(mu1, mu2, &policy, horizon).unwrap();
    let report = run_campaign(&CampaignConfig {
        arms: vec![
            ArmModel::bernoulli(mu1).unwrap(),
            ArmModel::bernoulli(mu2).unwrap(),
        ],
        policy,
        horizon,
        n_trials: 200_000,
        master_seed: 9,
        checkpoints: vec![horizon],
    })
    .unwrap();
    let last = report.last();
    for (e, exact) in last.arms.iter().zip([exact.bias1, exact.bias2]) {
        assert!(
            (e.bias - exact).abs() < 4.0 * e.bias_se,
            "{} vs {exact} (se {})",
            e.bias,
            e.bias_se
        );
    }
}
