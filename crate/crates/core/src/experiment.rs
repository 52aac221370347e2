//! Running configured experiments and writing their records to disk.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::agents::Agent;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::harness::{run_training, write_run, RunRecord, RunSidecar};

/// Environment variable naming the default output root.
pub const OUT_ENV_VAR: &str = "SPECTRAL_RL_OUT";

/// Trains one seed of `cfg` and returns its record and sidecar.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(RunRecord, RunSidecar)> {
    let started = Instant::now();
    let mut env = cfg.env_config().build()?;
    let mut agent = Agent::new(cfg.agent_config()?, env.observation_dim(), env.num_actions(), seed)?;
    let record = run_training(&mut agent, env.as_mut(), &cfg.run_options(seed), |_, _| Ok(()))?;
    let sidecar = RunSidecar {
        seed,
        agent: record.agent.clone(),
        env: record.env.clone(),
        config: serde_json::to_value(cfg)?,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        episodes: record.episodes.len(),
    };
    Ok((record, sidecar))
}

/// `<root>/<env>_<agent>`.
pub fn run_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(format!("{}_{}", cfg.env, cfg.agent))
}

/// Runs every `(config, seed)` job with at most `jobs` in parallel and
/// writes `seed_<k>.csv` / `seed_<k>.json` under each config's run dir.
/// Returns the run directories in input order.
pub fn run_experiments(configs: &[ExperimentConfig], root: &Path, jobs: usize) -> Result<Vec<PathBuf>> {
    let work: Vec<(&ExperimentConfig, u64)> = configs
        .iter()
        .flat_map(|c| c.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        work.par_iter().try_for_each(|&(cfg, seed)| {
            let (record, sidecar) = run_seed(cfg, seed)?;
            write_run(&run_dir(root, cfg), &record, &sidecar)
        })
    })?;
    let mut dirs: Vec<PathBuf> = configs.iter().map(|c| run_dir(root, c)).collect();
    dirs.dedup();
    Ok(dirs)
}
