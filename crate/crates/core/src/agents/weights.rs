use serde::{Deserialize, Serialize};

use super::config::WeightMode;
use crate::codec::CodecConfig;
use crate::error::Result;
use crate::transforms::RunningStats;

/// Per-frequency weights applied to the hidden-layer error signal.
///
/// Inverse-variance weights are reported relative to frequency 0,
/// `w_i = sigma_0^2 / sigma_i^2`. The common factor only rescales the
/// hidden-layer gradient, which Adam normalizes away, and it makes a
/// single-frequency agent weight its one head by exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    mode: WeightMode,
    base: f64,
    stats: Vec<RunningStats>,
}

impl LossWeights {
    pub fn new(mode: WeightMode, codec: &CodecConfig, beta: f64, sigma_min: f64) -> Result<Self> {
        let stats = RunningStats::new(beta, sigma_min)?;
        Ok(Self {
            mode,
            base: codec.base(),
            stats: vec![stats; codec.num_components()],
        })
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn stats(&self) -> &[RunningStats] {
        &self.stats
    }

    /// Fold one batch of per-frequency targets (`[batch][heads]`) into the
    /// running statistics.
    pub fn observe_targets(&mut self, targets: &[f64], column: &mut Vec<f64>) {
        let heads = self.stats.len();
        let batch = targets.len() / heads;
        for (h, stats) in self.stats.iter_mut().enumerate() {
            column.clear();
            column.extend((0..batch).map(|b| targets[b * heads + h]));
            stats.update(column);
        }
    }

    pub fn weights_into(&self, out: &mut Vec<f64>) {
        out.clear();
        match self.mode {
            WeightMode::Flat => out.resize(self.stats.len(), 1.0),
            WeightMode::Exponential => out.extend((0..self.stats.len()).map(|i| self.base.powi(i as i32))),
            WeightMode::InverseVariance => {
                let v0 = self.stats[0].sigma().powi(2);
                out.extend(self.stats.iter().map(|s| v0 / s.sigma().powi(2)));
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.weights_into(&mut out);
        out
    }
}
