//! Simulation and debiasing of adaptively collected data.
//!
//! Data are collected from `K` arms over `T` rounds by a selection function
//! (Greedy, ε-Greedy, lil' UCB or Thompson Sampling, optionally randomized
//! with Gumbel noise). Sample means of such data are biased downward; this
//! crate measures that bias and implements three corrections:
//!
//! - data splitting ([`estimators::heldout_estimate`]),
//! - propensity weighting ([`estimators::propensity_estimate`]),
//! - the conditional maximum likelihood estimator fitted by contrastive
//!   divergence ([`cmle::cd_fit`]).
//!
//! ```
//! use adabias::{ArmModel, PolicyConfig, Policy, TrialSeed, simulate};
//!
//! let arms = vec![ArmModel::gaussian(1.0, 1.0).unwrap(), ArmModel::gaussian(0.75, 1.0).unwrap()];
//! let policy = PolicyConfig::new(Policy::Greedy);
//! let trace = simulate::run_trial(&arms, &policy, 20, TrialSeed::new(7, 0), Default::default()).unwrap();
//! assert_eq!(trace.selections.len(), 20);
//! ```

pub mod arm;
pub mod cmle;
pub mod error;
pub mod estimators;
pub mod policy;
pub mod properties;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod trace;

pub use arm::{ArmModel, Family};
pub use error::{Error, Result};
pub use policy::{
    DecisionStatVector, GumbelNoise, LilUcbParams, Policy, PolicyConfig, ThompsonPrior,
};
pub use rng::{Purpose, RngStream, TrialSeed};
pub use trace::Trace;
