//! Training harness, aggregation and plotting, driven end to end.

use spectral_rl::agents::AgentKind;
use spectral_rl::config::ExperimentConfig;
use spectral_rl::env::EnvKind;
use spectral_rl::experiment::{run_experiments, run_seed};
use spectral_rl::harness::{aggregate_runs, read_run_dir, EpisodeRow, Metric, RunRecord};
use spectral_rl::plot::{return_curves_svg, write_plots};

fn small(agent: AgentKind, env: EnvKind, frames: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset("desk", agent, env).unwrap();
    cfg.frames = frames;
    cfg.hidden = vec![16];
    cfg.learning_starts = 200;
    cfg.probe_period = 500;
    cfg
}

#[test]
fn same_seed_same_record() {
    for agent in [AgentKind::Spectral, AgentKind::Popart, AgentKind::DqnTc, AgentKind::DqnClip] {
        let cfg = small(agent, EnvKind::ExpCatch, 3000);
        let (a, _) = run_seed(&cfg, 4).unwrap();
        let (b, _) = run_seed(&cfg, 4).unwrap();
        assert_eq!(a, b, "{agent}");
        let (c, _) = run_seed(&cfg, 5).unwrap();
        assert_ne!(a.losses, c.losses, "{agent}");
    }
}

#[test]
fn telemetry_does_not_perturb_training() {
    let mut cfg = small(AgentKind::Spectral, EnvKind::TwoPhase, 4000);
    let (with, _) = run_seed(&cfg, 1).unwrap();
    cfg.telemetry = false;
    let (without, _) = run_seed(&cfg, 1).unwrap();
    assert!(!with.td_errors.is_empty());
    assert!(without.td_errors.is_empty());
    assert_eq!(with.episodes, without.episodes);
    assert_eq!(with.losses, without.losses);
}

#[test]
fn records_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(AgentKind::Spectral, EnvKind::ExpCatch, 2000);
    cfg.seeds = vec![0, 1];
    let dirs = run_experiments(&[cfg.clone()], dir.path(), 2).unwrap();
    assert_eq!(dirs.len(), 1);
    let back = read_run_dir(&dirs[0]).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[1], run_seed(&cfg, 1).unwrap().0);
}

/// Every episode replays the reward stream 1, 4, 11, -4, -10 at gamma 0.99.
fn worked_example_record(seed: u64) -> RunRecord {
    let value: f64 = [1.0, 4.0, 11.0, -4.0, -10.0]
        .iter()
        .enumerate()
        .map(|(t, r)| 0.99f64.powi(t as i32) * r)
        .sum();
    let mut record = RunRecord::new(seed, "spectral", "exp_catch");
    record.episodes = (1..=40)
        .map(|k| EpisodeRow {
            frame: k * 250,
            raw_return: value,
            unexponentiated_return: value,
            max_phase: 0,
            phase_b_catches: 0,
            length: 5,
        })
        .collect();
    record
}

#[test]
fn constant_returns_plot_as_a_flat_line() {
    let records: Vec<RunRecord> = (0..3).map(worked_example_record).collect();
    let curves = aggregate_runs(&records, 1000, Metric::Return);
    assert_eq!(curves.len(), 1);
    assert_eq!(curves[0].points.len(), 10);
    for p in &curves[0].points {
        assert!((p.mean - 2.254).abs() < 1e-3, "{p:?}");
        assert!((p.upper - p.lower).abs() < 1e-12, "{p:?}");
        assert_eq!(p.seeds, 3);
    }
    let svg = return_curves_svg(&curves, "flat");
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("spectral"));
}

#[test]
fn td_plot_has_one_bucket_per_score() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(AgentKind::Spectral, EnvKind::ExpCatch, 3000);
    let (record, _) = run_seed(&cfg, 0).unwrap();
    assert!(record.td_errors.iter().all(|t| t.bucket < cfg.score_cap));
    let written = write_plots(&[record], dir.path(), 1000, Metric::Unexponentiated, Some(cfg.score_cap as usize)).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["returns_exp_catch.svg", "td_exp_catch_spectral.svg"]);
    let td = std::fs::read_to_string(&written[1]).unwrap();
    assert!(td.contains(&format!("buckets={}", cfg.score_cap)));
}
