//! Seeded training loops, episode logging, TD-percentage-error telemetry,
//! and cross-seed aggregation.

mod aggregate;
mod record;
mod runner;
mod telemetry;

pub use aggregate::{aggregate_runs, bootstrap_std, final_window_mean, mean, Curve, CurvePoint, BOOTSTRAP_RESAMPLES};
pub use record::{
    read_run_dir, read_sidecar, seed_stem, write_run, EpisodeRow, LossRow, Metric, RunRecord, RunSidecar, TdRow,
};
pub use runner::{run_training, Actor, RunOptions, TrackingActor};
pub use telemetry::{td_percent_error, TdTelemetry, MIN_TARGET_SCALE};
