//! Small summary-statistics helpers shared by the experiment drivers.

use serde::{Deserialize, Serialize};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Bias and MSE of one quantity across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub bias: f64,
    pub bias_se: f64,
    pub mse: f64,
    pub mse_se: f64,
    /// Trials in which the quantity was defined.
    pub trials: usize,
    /// Trials skipped because the quantity was undefined.
    pub excluded: usize,
}

/// Accumulates per-arm estimation errors `estimate - truth` across trials.
///
/// Pooled statistics average over arms within a trial first, so their
/// standard errors account for the correlation between arms.
#[derive(Debug, Clone)]
pub struct ErrorAccumulator {
    per_arm: Vec<Running>,
    per_arm_sq: Vec<Running>,
    excluded: Vec<usize>,
    pooled: Running,
    pooled_sq: Running,
    pooled_excluded: usize,
}

impl ErrorAccumulator {
    pub fn new(k: usize) -> Self {
        Self {
            per_arm: vec![Running::default(); k],
            per_arm_sq: vec![Running::default(); k],
            excluded: vec![0; k],
            pooled: Running::default(),
            pooled_sq: Running::default(),
            pooled_excluded: 0,
        }
    }

    /// Adds one trial. `None` marks an arm whose estimate was undefined; a
    /// trial with any undefined arm is left out of the pooled statistics.
    pub fn push(&mut self, errors: &[Option<f64>]) {
        let mut all_defined = true;
        for (k, e) in errors.iter().enumerate() {
            match e {
                Some(e) => {
                    self.per_arm[k].push(*e);
                    self.per_arm_sq[k].push(e * e);
                }
                None => {
                    self.excluded[k] += 1;
                    all_defined = false;
                }
            }
        }
        if all_defined && !errors.is_empty() {
            let k = errors.len() as f64;
            let e: Vec<f64> = errors.iter().map(|e| e.unwrap()).collect();
            self.pooled.push(e.iter().sum::<f64>() / k);
            self.pooled_sq
                .push(e.iter().map(|x| x * x).sum::<f64>() / k);
        } else {
            self.pooled_excluded += 1;
        }
    }

    pub fn arm(&self, k: usize) -> ErrorSummary {
        ErrorSummary {
            bias: self.per_arm[k].mean(),
            bias_se: self.per_arm[k].se(),
            mse: self.per_arm_sq[k].mean(),
            mse_se: self.per_arm_sq[k].se(),
            trials: self.per_arm[k].count(),
            excluded: self.excluded[k],
        }
    }

    pub fn arms(&self) -> Vec<ErrorSummary> {
        (0..self.per_arm.len()).map(|k| self.arm(k)).collect()
    }

    pub fn pooled(&self) -> ErrorSummary {
        ErrorSummary {
            bias: self.pooled.mean(),
            bias_se: self.pooled.se(),
            mse: self.pooled_sq.mean(),
            mse_se: self.pooled_sq.se(),
            trials: self.pooled.count(),
            excluded: self.pooled_excluded,
        }
    }
}

/// Pearson correlation coefficient; `NaN` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 3.25];
        let mut r = Running::default();
        xs.iter().for_each(|&x| r.push(x));
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0;
        assert!((r.mean() - m).abs() < 1e-12);
        assert!((r.variance() - v).abs() < 1e-12);
        assert!((r.se() - (v / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn accumulator_excludes_undefined_arms() {
        let mut acc = ErrorAccumulator::new(2);
        acc.push(&[Some(-1.0), Some(0.5)]);
        acc.push(&[Some(-0.5), None]);
        assert_eq!(acc.arm(0).trials, 2);
        assert_eq!(acc.arm(1).trials, 1);
        assert_eq!(acc.arm(1).excluded, 1);
        assert_eq!(acc.pooled().trials, 1);
        assert!((acc.pooled().bias + 0.25).abs() < 1e-15);
        assert!((acc.pooled().mse - 0.625).abs() < 1e-15);
    }

    #[test]
    fn pearson_signs() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[8.0, 6.0, 4.0, 2.0]) + 1.0).abs() < 1e-12);
    }
}
