//! TD-percentage-error telemetry, tracked per player-score bucket.

use serde::{Deserialize, Serialize};

use crate::agents::ProbeSample;

/// Targets with a mean magnitude below this give no datum.
pub const MIN_TARGET_SCALE: f64 = 1e-12;

/// `mean |pred - target| / mean |target|`, or `None` when the targets are
/// (numerically) all zero.
pub fn td_percent_error(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let err = samples.iter().map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let scale = samples.iter().map(|(_, t)| t.abs()).sum::<f64>() / n;
    (scale >= MIN_TARGET_SCALE).then(|| err / scale)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct BucketEma {
    abs_error: f64,
    abs_target: f64,
}

/// Running per-bucket means of `|pred - target|` and `|target|`.
///
/// Both means start at zero and are updated together with the same step
/// size, so their ratio is an exact weighted average and needs no bias
/// correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdTelemetry {
    beta: f64,
    buckets: Vec<Option<BucketEma>>,
}

impl TdTelemetry {
    pub fn new(num_buckets: usize, beta: f64) -> Self {
        Self {
            beta,
            buckets: vec![None; num_buckets.max(1)],
        }
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len()
    }

    /// Bucket for a player score; scores past the last bucket fold into it.
    pub fn bucket_of(&self, score: u32) -> usize {
        (score as usize).min(self.buckets.len() - 1)
    }

    /// Fold one probe's samples into the per-bucket means.
    pub fn update(&mut self, samples: &[ProbeSample]) {
        let mut sums = vec![(0.0, 0.0, 0usize); self.buckets.len()];
        for s in samples {
            let b = self.bucket_of(s.score);
            sums[b].0 += (s.predicted - s.target).abs();
            sums[b].1 += s.target.abs();
            sums[b].2 += 1;
        }
        for (bucket, (err, tgt, n)) in self.buckets.iter_mut().zip(sums) {
            if n == 0 {
                continue;
            }
            let (err, tgt) = (err / n as f64, tgt / n as f64);
            let ema = bucket.get_or_insert_with(BucketEma::default);
            ema.abs_error += self.beta * (err - ema.abs_error);
            ema.abs_target += self.beta * (tgt - ema.abs_target);
        }
    }

    /// Current ratio per bucket; `None` for buckets never probed or with
    /// all-zero targets.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.buckets
            .iter()
            .map(|b| b.and_then(|e| (e.abs_target >= MIN_TARGET_SCALE).then(|| e.abs_error / e.abs_target)))
            .collect()
    }
}
