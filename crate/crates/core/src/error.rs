use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid arm model: {0}")]
    InvalidArm(String),

    #[error("invalid policy configuration: {0}")]
    InvalidPolicy(String),

    /// lil' UCB's outer logarithm would be non-positive for some sample count.
    #[error("lil' UCB log argument is non-positive: ln(1+epsilon)/delta = {ratio} must exceed 1")]
    NonpositiveLogArgument { ratio: f64 },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("sample mean of arm {arm} is undefined at round {round}: no samples yet")]
    UndefinedMean { arm: usize, round: usize },

    #[error("exact enumeration limited to horizon {max}, requested {requested}")]
    StateSpaceTooLarge { requested: usize, max: usize },

    #[error(
        "hard-max selection probabilities are not differentiable; use a Gumbel-randomized policy"
    )]
    HardMaxUndifferentiable,

    #[error("trace was collected without Gumbel randomization; the conditional likelihood is degenerate")]
    HardMaxTrace,

    #[error("trace has no held-out samples (collected with splitting off)")]
    SplitMissing,

    #[error("selection probability of arm {arm} at round {round} is zero")]
    ZeroPropensity { arm: usize, round: usize },

    #[error("trace has no recorded Thompson posterior draws")]
    MissingPosteriorDraws,

    #[error("contrastive divergence diverged at iteration {iteration}: |theta| = {norm}")]
    Divergence { iteration: usize, norm: f64 },

    #[error("invalid cMLE configuration: {0}")]
    InvalidCmleConfig(String),

    #[error("serialization failed: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
