//! Parametric reward distributions for a single arm.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Bernoulli,
}

/// Reward distribution of one arm.
///
/// For Bernoulli arms `mean` is the success probability and `obs_std` is
/// ignored (stored as `sqrt(p(1-p))` for reporting only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmModel {
    pub family: Family,
    pub mean: f64,
    pub obs_std: f64,
}

impl ArmModel {
    pub fn gaussian(mean: f64, obs_std: f64) -> Result<Self> {
        let arm = Self {
            family: Family::Gaussian,
            mean,
            obs_std,
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        let arm = Self {
            family: Family::Bernoulli,
            mean: p,
            obs_std: (p * (1.0 - p)).max(0.0).sqrt(),
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::InvalidArm(format!(
                "mean {} is not finite",
                self.mean
            )));
        }
        match self.family {
            Family::Gaussian if !(self.obs_std > 0.0 && self.obs_std.is_finite()) => {
                Err(Error::InvalidArm(format!(
                    "Gaussian obs_std must be > 0, got {}",
                    self.obs_std
                )))
            }
            Family::Bernoulli if !(0.0..=1.0).contains(&self.mean) => Err(Error::InvalidArm(
                format!("Bernoulli mean must lie in [0, 1], got {}", self.mean),
            )),
            _ => Ok(()),
        }
    }

    /// Observation variance `σ²` (Gaussian) or `p(1-p)` (Bernoulli).
    pub fn variance(&self) -> f64 {
        match self.family {
            Family::Gaussian => self.obs_std * self.obs_std,
            Family::Bernoulli => self.mean * (1.0 - self.mean),
        }
    }

    /// One i.i.d. draw. Bernoulli draws are exactly `0.0` or `1.0`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => {
                let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
                self.mean + self.obs_std * z
            }
            Family::Bernoulli => {
                if rng.random::<f64>() < self.mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Log density of `N(mean, std²)` at `x`.
pub fn gaussian_log_density(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStream};

    #[test]
    fn degenerate_bernoulli() {
        let mut s = RngStream::new(1, 0, Purpose::ArmDraw);
        let one = ArmModel::bernoulli(1.0).unwrap();
        let zero = ArmModel::bernoulli(0.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(one.draw(&mut s), 1.0);
            assert_eq!(zero.draw(&mut s), 0.0);
        }
    }

    #[test]
    fn gaussian_law_of_large_numbers() {
        // SE of the mean at 1e6 draws is 1e-3; tolerance is 4 SE.
        let arm = ArmModel::gaussian(2.0, 1.0).unwrap();
        let mut s = RngStream::new(2024, 0, Purpose::ArmDraw);
        let n = 1_000_000;
        let sum: f64 = (0..n).map(|_| arm.draw(&mut s)).sum();
        assert!((sum / n as f64 - 2.0).abs() < 4e-3);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ArmModel::bernoulli(1.5).is_err());
        assert!(ArmModel::bernoulli(-0.1).is_err());
        assert!(ArmModel::gaussian(0.0, 0.0).is_err());
        assert!(ArmModel::gaussian(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn reproducible_draws() {
        let arm = ArmModel::gaussian(0.3, 2.0).unwrap();
        let mut a = RngStream::new(9, 4, Purpose::ArmDraw);
        let mut b = RngStream::new(9, 4, Purpose::ArmDraw);
        for _ in 0..100 {
            assert_eq!(arm.draw(&mut a).to_bits(), arm.draw(&mut b).to_bits());
        }
    }
}
