//! Cross-seed aggregation with bootstrapped confidence bands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{Metric, RunRecord};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0x5eed;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard deviation of the resampled mean over `resamples` bootstrap
/// draws (with replacement) of `values`.
pub fn bootstrap_std(values: &[f64], resamples: usize, rng: &mut impl Rng) -> f64 {
    let n = values.len();
    if n < 2 || resamples == 0 {
        return 0.0;
    }
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let m = mean(&means);
    (means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / resamples as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// End frame of the window.
    pub frame: u64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Seeds with at least one episode in this window.
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub agent: String,
    pub env: String,
    pub metric: Metric,
    pub points: Vec<CurvePoint>,
}

/// Mean of `metric` per seed in consecutive windows of `window` frames,
/// then mean across seeds with a bootstrap (over seeds) +-1 std band.
///
/// Records are grouped by `(agent, env)`; one curve per group, in order of
/// first appearance.
pub fn aggregate_runs(records: &[RunRecord], window: u64, metric: Metric) -> Vec<Curve> {
    let window = window.max(1);
    let mut groups: Vec<((String, String), Vec<&RunRecord>)> = Vec::new();
    for r in records {
        let key = (r.agent.clone(), r.env.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    groups
        .into_iter()
        .map(|((agent, env), runs)| {
            let last = runs.iter().flat_map(|r| r.episodes.last()).map(|e| e.frame).max().unwrap_or(0);
            let windows = last.div_ceil(window);
            let mut points = Vec::new();
            for w in 0..windows {
                let (lo, hi) = (w * window, (w + 1) * window);
                let per_seed: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| {
                        let v: Vec<f64> = r
                            .episodes
                            .iter()
                            .filter(|e| e.frame > lo && e.frame <= hi)
                            .map(|e| metric.of(e))
                            .collect();
                        (!v.is_empty()).then(|| mean(&v))
                    })
                    .collect();
                if per_seed.is_empty() {
                    continue;
                }
                let m = mean(&per_seed);
                let s = bootstrap_std(&per_seed, BOOTSTRAP_RESAMPLES, &mut rng);
                points.push(CurvePoint {
                    frame: hi,
                    mean: m,
                    lower: m - s,
                    upper: m + s,
                    seeds: per_seed.len(),
                });
            }
            Curve {
                agent,
                env,
                metric,
                points,
            }
        })
        .collect()
}

/// Mean over seeds of each run's mean `metric` for episodes ending after
/// `frames - window`. Runs without such episodes are skipped.
pub fn final_window_mean(records: &[RunRecord], frames: u64, window: u64, metric: Metric) -> Option<f64> {
    let from = frames.saturating_sub(window);
    let per_seed: Vec<f64> = records.iter().filter_map(|r| r.mean_after(from, metric)).collect();
    (!per_seed.is_empty()).then(|| mean(&per_seed))
}
