//! Target compression and running target statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the square-root squashing function `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquashConfig {
    epsilon: f64,
}

impl SquashConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "squash epsilon must be > 0, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for SquashConfig {
    fn default() -> Self {
        Self { epsilon: 1e-2 }
    }
}

/// `h(x) = sign(x) (sqrt(|x| + 1) - 1) + eps x`
pub fn squash(x: f64, cfg: &SquashConfig) -> f64 {
    // sqrt(|x| + 1) - 1 rewritten as |x| / (sqrt(|x| + 1) + 1) to avoid cancellation near 0
    x / ((x.abs() + 1.0).sqrt() + 1.0) + cfg.epsilon * x
}

/// Closed-form inverse of [`squash`]:
/// `sign(y) (((sqrt(1 + 4 eps (|y| + 1 + eps)) - 1) / (2 eps))^2 - 1)`.
pub fn unsquash(y: f64, cfg: &SquashConfig) -> f64 {
    let eps = cfg.epsilon;
    let a = y.abs();
    // With root = (sqrt(D) - 1) / (2 eps) and D = (1 + 2 eps)^2 + 4 eps |y|,
    // root - 1 = 2 |y| / (sqrt(D) + 1 + 2 eps), and root^2 - 1 = (root - 1)(root + 1).
    let d = (1.0 + 2.0 * eps).powi(2) + 4.0 * eps * a;
    let root_minus_one = 2.0 * a / (d.sqrt() + 1.0 + 2.0 * eps);
    let magnitude = root_minus_one * (root_minus_one + 2.0);
    if y < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Exponentially weighted first and second moments with a floored standard deviation.
///
/// Each call to [`RunningStats::update`] folds in the mean of one batch of
/// observations with step size `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    mean: f64,
    second_moment: f64,
    beta: f64,
    sigma_min: f64,
    updates: u64,
}

impl RunningStats {
    pub const DEFAULT_BETA: f64 = 1e-3;
    pub const DEFAULT_SIGMA_MIN: f64 = 1e-4;

    /// Starts at mean 0, second moment 1 (so sigma = 1).
    pub fn new(beta: f64, sigma_min: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!("stats beta must be in [0, 1], got {beta}")));
        }
        if !(sigma_min.is_finite() && sigma_min > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma_min must be > 0, got {sigma_min}")));
        }
        Ok(Self {
            mean: 0.0,
            second_moment: 1.0,
            beta,
            sigma_min,
            updates: 0,
        })
    }

    /// Stats with explicit moments, mainly for tests and checkpoint restore.
    pub fn with_moments(mean: f64, second_moment: f64, beta: f64, sigma_min: f64) -> Result<Self> {
        let mut stats = Self::new(beta, sigma_min)?;
        stats.mean = mean;
        stats.second_moment = second_moment;
        Ok(stats)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn sigma(&self) -> f64 {
        let variance = self.second_moment - self.mean * self.mean;
        let floor = self.sigma_min * self.sigma_min;
        // NaN-safe: any non-finite variance falls to the floor
        if variance > floor {
            variance.sqrt()
        } else {
            self.sigma_min
        }
    }

    /// Folds in one batch. An empty batch or non-finite batch mean is ignored.
    pub fn update(&mut self, observations: &[f64]) {
        if observations.is_empty() || self.beta == 0.0 {
            return;
        }
        let n = observations.len() as f64;
        let batch_mean = observations.iter().sum::<f64>() / n;
        let batch_sq = observations.iter().map(|x| x * x).sum::<f64>() / n;
        if !(batch_mean.is_finite() && batch_sq.is_finite()) {
            return;
        }
        self.mean = (1.0 - self.beta) * self.mean + self.beta * batch_mean;
        self.second_moment = (1.0 - self.beta) * self.second_moment + self.beta * batch_sq;
        self.updates += 1;
    }

    pub fn updated(mut self, observations: &[f64]) -> Self {
        self.update(observations);
        self
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.sigma()
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.sigma() + self.mean
    }
}

impl Default for RunningStats {
    fn default() -> Self {
        Self::new(Self::DEFAULT_BETA, Self::DEFAULT_SIGMA_MIN).unwrap()
    }
}
