use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{EpisodeRow, LossRow, RunRecord, TdRow};
use super::telemetry::TdTelemetry;
use crate::agents::{stream, Agent, ProbeSample, TrainMetrics, Transition};
use crate::env::Environment;
use crate::error::Result;

const STREAM_EPISODES: u64 = 4;
const STREAM_PROBE: u64 = 5;

/// Anything that can act in an environment and learn from its transitions.
pub trait Actor {
    fn name(&self) -> &str;

    fn act(&mut self, observation: &[f64]) -> Result<usize>;

    fn observe(&mut self, transition: &Transition<'_>) -> Result<Option<TrainMetrics>>;

    /// TD-error samples for telemetry. Must not change the actor's state.
    fn probe(&self, _rng: &mut ChaCha8Rng, _samples: usize) -> Result<Vec<ProbeSample>> {
        Ok(Vec::new())
    }
}

impl Actor for Agent {
    fn name(&self) -> &str {
        self.kind().name()
    }

    fn act(&mut self, observation: &[f64]) -> Result<usize> {
        self.select_action(observation)
    }

    fn observe(&mut self, transition: &Transition<'_>) -> Result<Option<TrainMetrics>> {
        Agent::observe(self, transition)
    }

    fn probe(&self, rng: &mut ChaCha8Rng, samples: usize) -> Result<Vec<ProbeSample>> {
        self.probe_td(rng, samples)
    }
}

/// Scripted catch policy that moves the paddle toward the ball column.
///
/// Reads the catch observation layout `[ball_col, ball_row, paddle_col, ..]`.
#[derive(Debug, Clone, Default)]
pub struct TrackingActor;

impl Actor for TrackingActor {
    fn name(&self) -> &str {
        "tracking"
    }

    fn act(&mut self, observation: &[f64]) -> Result<usize> {
        let (ball, paddle) = (observation[0], observation[2]);
        Ok(if paddle > ball {
            0
        } else if paddle < ball {
            2
        } else {
            1
        })
    }

    fn observe(&mut self, _transition: &Transition<'_>) -> Result<Option<TrainMetrics>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub frames: u64,
    pub seed: u64,
    /// Record TD-percentage errors at every probe.
    pub telemetry: bool,
    /// Frames between probes (telemetry and probe hooks).
    pub probe_period: u64,
    /// Replay samples per telemetry probe.
    pub probe_samples: usize,
    /// EMA step of the per-bucket telemetry means.
    pub probe_beta: f64,
    /// Log the training loss every this many updates (0 disables).
    pub loss_log_period: u64,
}

impl RunOptions {
    pub fn new(frames: u64, seed: u64) -> Self {
        Self {
            frames,
            seed,
            telemetry: true,
            probe_period: 1_000,
            probe_samples: 256,
            probe_beta: crate::transforms::RunningStats::DEFAULT_BETA,
            loss_log_period: 100,
        }
    }
}

/// Runs `frames` environment steps, resetting at episode ends.
///
/// Episode seeds, probe sampling, and everything inside the actor use
/// separate random streams derived from `opts.seed`, so turning telemetry
/// on or off leaves the training trajectory untouched. `on_probe` is called
/// at every probe frame after telemetry is recorded.
pub fn run_training<A: Actor>(
    actor: &mut A,
    env: &mut dyn Environment,
    opts: &RunOptions,
    mut on_probe: impl FnMut(u64, &A) -> Result<()>,
) -> Result<RunRecord> {
    let mut record = RunRecord::new(opts.seed, actor.name(), env.name());
    if opts.frames == 0 {
        return Ok(record);
    }
    let mut episode_rng = stream(opts.seed, STREAM_EPISODES);
    let mut probe_rng = stream(opts.seed, STREAM_PROBE);
    let mut telemetry = TdTelemetry::new(env.score_cap() as usize, opts.probe_beta);

    let mut obs = env.reset(episode_rng.gen());
    let (mut ret, mut unexp, mut max_phase, mut length) = (0.0, 0.0, env.current_phase().index(), 0u64);
    for frame in 1..=opts.frames {
        let score = env.current_score();
        let phase = env.current_phase().index();
        let action = actor.act(obs.as_slice())?;
        let step = env.step(action)?;
        let metrics = actor.observe(&Transition {
            observation: obs.as_slice(),
            action,
            reward: step.reward,
            next_observation: step.observation.as_slice(),
            terminal: step.terminal,
            score,
            phase,
        })?;
        if let Some(m) = metrics {
            if opts.loss_log_period > 0 && m.update % opts.loss_log_period == 0 {
                record.losses.push(LossRow { frame, value: m.loss });
            }
        }
        ret += step.reward;
        unexp += step.info.unexponentiated_delta as f64;
        max_phase = max_phase.max(step.info.phase.index());
        length += 1;
        if step.terminal {
            record.episodes.push(EpisodeRow {
                frame,
                raw_return: ret,
                unexponentiated_return: unexp,
                max_phase,
                phase_b_catches: step.info.phase_b_catches,
                length,
            });
            obs = env.reset(episode_rng.gen());
            (ret, unexp, max_phase, length) = (0.0, 0.0, env.current_phase().index(), 0);
        } else {
            obs = step.observation;
        }

        if opts.probe_period > 0 && frame % opts.probe_period == 0 {
            if opts.telemetry {
                let samples = actor.probe(&mut probe_rng, opts.probe_samples)?;
                if !samples.is_empty() {
                    telemetry.update(&samples);
                    for (bucket, ratio) in telemetry.ratios().into_iter().enumerate() {
                        if let Some(value) = ratio {
                            record.td_errors.push(TdRow {
                                frame,
                                bucket: bucket as u32,
                                value,
                            });
                        }
                    }
                }
            }
            on_probe(frame, actor)?;
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentConfig, AgentKind};
    use crate::env::{EnvConfig, EnvKind};

    fn small_config(kind: AgentKind) -> AgentConfig {
        AgentConfig {
            hidden: vec![16],
            learning_starts: 100,
            replay_capacity: 1_000,
            eps_decay_frames: 1_000,
            target_period: 20,
            ..AgentConfig::desk(kind)
        }
    }

    fn run(kind: AgentKind, frames: u64, telemetry: bool) -> RunRecord {
        let mut env = EnvConfig::new(EnvKind::ExpCatch).build().unwrap();
        let mut agent = Agent::new(small_config(kind), env.observation_dim(), env.num_actions(), 5).unwrap();
        let opts = RunOptions {
            telemetry,
            probe_period: 250,
            probe_samples: 32,
            loss_log_period: 10,
            ..RunOptions::new(frames, 5)
        };
        run_training(&mut agent, env.as_mut(), &opts, |_, _| Ok(())).unwrap()
    }

    #[test]
    fn zero_frames_gives_empty_record() {
        let rec = run(AgentKind::Spectral, 0, true);
        assert!(rec.episodes.is_empty() && rec.td_errors.is_empty() && rec.losses.is_empty());
    }

    #[test]
    fn runs_are_deterministic() {
        for kind in AgentKind::ALL {
            assert_eq!(run(kind, 1_500, true), run(kind, 1_500, true), "{kind}");
        }
    }

    #[test]
    fn telemetry_is_read_only() {
        let with = run(AgentKind::Popart, 2_000, true);
        let mut without = run(AgentKind::Popart, 2_000, false);
        assert!(!with.td_errors.is_empty());
        assert!(without.td_errors.is_empty());
        without.td_errors = with.td_errors.clone();
        assert_eq!(with, without);
    }

    #[test]
    fn scripted_tracker_scores_perfectly() {
        let mut env = EnvConfig::new(EnvKind::ExpCatch).build().unwrap();
        let rec = run_training(&mut TrackingActor, env.as_mut(), &RunOptions::new(2_000, 1), |_, _| Ok(())).unwrap();
        assert!(!rec.episodes.is_empty());
        for e in &rec.episodes {
            assert_eq!(e.raw_return, 2_097_151.0);
            assert_eq!(e.unexponentiated_return, 21.0);
        }
    }
}
