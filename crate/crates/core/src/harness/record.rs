//! Run records and their CSV / JSON persistence.
//!
//! One CSV row per logged event with columns
//! `frame,event_type,value,bucket,seed,agent,env`, plus a JSON sidecar that
//! holds the effective configuration and the wall-clock time.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    /// Frame at which the episode ended.
    pub frame: u64,
    pub raw_return: f64,
    pub unexponentiated_return: f64,
    pub max_phase: u8,
    pub phase_b_catches: u32,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdRow {
    pub frame: u64,
    pub bucket: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub frame: u64,
    pub value: f64,
}

/// Everything logged by one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub agent: String,
    pub env: String,
    pub episodes: Vec<EpisodeRow>,
    pub td_errors: Vec<TdRow>,
    pub losses: Vec<LossRow>,
}

/// Episode quantity used for curves and comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Return,
    Unexponentiated,
}

impl Metric {
    pub fn of(self, e: &EpisodeRow) -> f64 {
        match self {
            Metric::Return => e.raw_return,
            Metric::Unexponentiated => e.unexponentiated_return,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Return => "episodic return",
            Metric::Unexponentiated => "unexponentiated return",
        }
    }
}

impl RunRecord {
    pub fn new(seed: u64, agent: &str, env: &str) -> Self {
        Self {
            seed,
            agent: agent.to_string(),
            env: env.to_string(),
            ..Self::default()
        }
    }

    /// Mean of `metric` over episodes ending after frame `from`, if any.
    pub fn mean_after(&self, from: u64, metric: Metric) -> Option<f64> {
        let values: Vec<f64> = self.episodes.iter().filter(|e| e.frame > from).map(|e| metric.of(e)).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Rows in frame order, as written to CSV.
    fn rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        let row = |frame, event_type: &str, value, bucket| CsvRow {
            frame,
            event_type: event_type.to_string(),
            value,
            bucket,
            seed: self.seed,
            agent: self.agent.clone(),
            env: self.env.clone(),
        };
        for e in &self.episodes {
            rows.push(row(e.frame, EV_RETURN, e.raw_return, None));
            rows.push(row(e.frame, EV_UNEXP, e.unexponentiated_return, None));
            rows.push(row(e.frame, EV_PHASE, e.max_phase as f64, None));
            rows.push(row(e.frame, EV_PHASE_B, e.phase_b_catches as f64, None));
            rows.push(row(e.frame, EV_LENGTH, e.length as f64, None));
        }
        for t in &self.td_errors {
            rows.push(row(t.frame, EV_TD, t.value, Some(t.bucket)));
        }
        for l in &self.losses {
            rows.push(row(l.frame, EV_LOSS, l.value, None));
        }
        // stable: events logged at the same frame keep their kind order
        rows.sort_by_key(|r| r.frame);
        rows
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rec = RunRecord::default();
        let mut pending: Option<EpisodeRow> = None;
        for row in r.deserialize::<CsvRow>() {
            let row = row?;
            rec.seed = row.seed;
            rec.agent = row.agent;
            rec.env = row.env;
            let bad = |what: &str| Error::InvalidConfig(format!("{}: malformed record ({what})", path.display()));
            match row.event_type.as_str() {
                EV_RETURN => {
                    if pending.is_some() {
                        return Err(bad("episode without length"));
                    }
                    pending = Some(EpisodeRow {
                        frame: row.frame,
                        raw_return: row.value,
                        unexponentiated_return: 0.0,
                        max_phase: 0,
                        phase_b_catches: 0,
                        length: 0,
                    });
                }
                EV_UNEXP | EV_PHASE | EV_PHASE_B | EV_LENGTH => {
                    let e = pending.as_mut().ok_or_else(|| bad("episode field before return"))?;
                    match row.event_type.as_str() {
                        EV_UNEXP => e.unexponentiated_return = row.value,
                        EV_PHASE => e.max_phase = row.value as u8,
                        EV_PHASE_B => e.phase_b_catches = row.value as u32,
                        _ => {
                            e.length = row.value as u64;
                            rec.episodes.extend(pending.take());
                        }
                    }
                }
                EV_TD => rec.td_errors.push(TdRow {
                    frame: row.frame,
                    bucket: row.bucket.ok_or_else(|| bad("td_error without bucket"))?,
                    value: row.value,
                }),
                EV_LOSS => rec.losses.push(LossRow {
                    frame: row.frame,
                    value: row.value,
                }),
                other => return Err(bad(&format!("unknown event type {other}"))),
            }
        }
        if pending.is_some() {
            return Err(Error::InvalidConfig(format!("{}: truncated episode", path.display())));
        }
        Ok(rec)
    }
}

const EV_RETURN: &str = "episode_return";
const EV_UNEXP: &str = "unexponentiated_return";
const EV_PHASE: &str = "max_phase";
const EV_PHASE_B: &str = "phase_b_catches";
const EV_LENGTH: &str = "episode_length";
const EV_TD: &str = "td_error";
const EV_LOSS: &str = "loss";

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    frame: u64,
    event_type: String,
    value: f64,
    bucket: Option<u32>,
    seed: u64,
    agent: String,
    env: String,
}

/// JSON sidecar written next to each run's CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSidecar {
    pub seed: u64,
    pub agent: String,
    pub env: String,
    /// Effective experiment configuration, verbatim.
    pub config: serde_json::Value,
    pub wall_clock_seconds: f64,
    pub episodes: usize,
}

pub fn seed_stem(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}"))
}

/// Writes `<dir>/seed_<k>.csv` and `<dir>/seed_<k>.json`.
pub fn write_run(dir: &Path, record: &RunRecord, sidecar: &RunSidecar) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = seed_stem(dir, record.seed);
    record.write_csv(&stem.with_extension("csv"))?;
    let json_path = stem.with_extension("json");
    let json = serde_json::to_string_pretty(sidecar)?;
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))
}

pub fn read_sidecar(path: &Path) -> Result<RunSidecar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// All run records (`seed_*.csv`) directly inside `dir`, ordered by seed.
pub fn read_run_dir(dir: &Path) -> Result<Vec<RunRecord>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_run = path.extension().is_some_and(|x| x == "csv")
            && path.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.starts_with("seed_"));
        if is_run {
            records.push(RunRecord::read_csv(&path)?);
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(dir.to_path_buf()));
    }
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fixture() -> RunRecord {
        RunRecord {
            seed: 3,
            agent: "spectral".into(),
            env: "exp_catch".into(),
            episodes: vec![
                EpisodeRow {
                    frame: 120,
                    raw_return: -7.0,
                    unexponentiated_return: -3.0,
                    max_phase: 0,
                    phase_b_catches: 0,
                    length: 120,
                },
                EpisodeRow {
                    frame: 300,
                    raw_return: 0.1 + 0.2,
                    unexponentiated_return: 2.0,
                    max_phase: 1,
                    phase_b_catches: 4,
                    length: 180,
                },
            ],
            td_errors: vec![
                TdRow {
                    frame: 200,
                    bucket: 0,
                    value: 0.25,
                },
                TdRow {
                    frame: 200,
                    bucket: 3,
                    value: 1.0 / 3.0,
                },
            ],
            losses: vec![LossRow {
                frame: 150,
                value: 1e-17,
            }],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seed_3.csv");
        let rec = fixture();
        rec.write_csv(&path).unwrap();
        assert_eq!(RunRecord::read_csv(&path).unwrap(), rec);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("frame,event_type,value,bucket,seed,agent,env\n"));
        let frames: Vec<u64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(frames.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn run_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = fixture();
        let side = RunSidecar {
            seed: 3,
            agent: rec.agent.clone(),
            env: rec.env.clone(),
            config: serde_json::json!({"base": 2.0}),
            wall_clock_seconds: 1.5,
            episodes: 2,
        };
        write_run(dir.path(), &rec, &side).unwrap();
        assert_eq!(read_run_dir(dir.path()).unwrap(), vec![rec]);
        assert_eq!(read_sidecar(&dir.path().join("seed_3.json")).unwrap(), side);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_run_dir(dir.path()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn mean_after() {
        let rec = fixture();
        assert_eq!(rec.mean_after(0, Metric::Unexponentiated), Some(-0.5));
        assert_eq!(rec.mean_after(200, Metric::Unexponentiated), Some(2.0));
        assert_eq!(rec.mean_after(300, Metric::Return), None);
    }
}
