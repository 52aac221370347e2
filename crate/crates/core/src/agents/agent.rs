use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{AgentConfig, AgentKind};
use super::replay::{ReplayBuffer, SampledBatch, Transition};
use super::targets::{
    aggregate, dqn_target, head_signals, n_step_return, popart_preserve, spectral_next_values, spectral_targets,
    tc_target,
};
use super::weights::LossWeights;
use crate::codec::decompose_into;
use crate::error::{Error, Result};
use crate::nn::{AdamState, ForwardCache, Gradients, HeadLayout, Mlp};
use crate::transforms::{unsquash, RunningStats};
use crate::util::{argmax, epsilon_greedy, max_value};

/// Random stream ids derived from the agent seed.
const STREAM_INIT: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_REPLAY: u64 = 3;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Summary of one optimizer update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub update: u64,
    /// Mean over the batch of `1/2 sum_h (y_h - Q_h)^2` in training space.
    pub loss: f64,
    /// Mean over the batch of `sum_h |y_h - Q_h|` in training space.
    pub mean_abs_td: f64,
    /// Spectral targets outside `[-1/(1-gamma), 1/(1-gamma)]`.
    pub bound_violations: u32,
}

/// One TD-error probe sample in the agent's true value space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub score: u32,
    pub predicted: f64,
    pub target: f64,
}

/// Per-update scratch space, reused to avoid allocation in the hot loop.
#[derive(Debug, Clone, Default)]
struct Scratch {
    batch: SampledBatch,
    online: ForwardCache,
    target: ForwardCache,
    next_q: Vec<f64>,
    targets: Vec<f64>,
    next_values: Vec<f64>,
    decomposed: Vec<f64>,
    column: Vec<f64>,
    weights: Vec<f64>,
    final_signal: Vec<f64>,
    hidden_signal: Vec<f64>,
}

/// A value-based deep agent of any [`AgentKind`].
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    layout: HeadLayout,
    obs_dim: usize,
    online: Mlp,
    target: Mlp,
    adam: AdamState,
    grads: Gradients,
    replay: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    popart: RunningStats,
    loss_weights: Option<LossWeights>,
    frames: u64,
    updates: u64,
    scratch: Scratch,
}

impl Agent {
    pub fn new(config: AgentConfig, obs_dim: usize, num_actions: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if num_actions == 0 || obs_dim == 0 {
            return Err(Error::InvalidConfig("agent needs at least one action and input".into()));
        }
        let heads = if config.kind.is_spectral() {
            config.codec.num_components()
        } else {
            1
        };
        let layout = HeadLayout {
            heads,
            actions: num_actions,
        };
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(layout.outputs());
        let online = Mlp::new(&sizes, config.zero_final(), &mut stream(seed, STREAM_INIT))?;
        let loss_weights = match config.kind.weight_mode() {
            Some(mode) => Some(LossWeights::new(mode, &config.codec, config.stats_beta, config.sigma_min)?),
            None => None,
        };
        Ok(Self {
            layout,
            obs_dim,
            target: online.clone(),
            adam: AdamState::new(&online, config.adam),
            grads: online.gradients(),
            online,
            replay: ReplayBuffer::new(config.replay_capacity, obs_dim, config.n_step)?,
            explore_rng: stream(seed, STREAM_EXPLORE),
            replay_rng: stream(seed, STREAM_REPLAY),
            popart: RunningStats::new(config.stats_beta, config.sigma_min)?,
            loss_weights,
            frames: 0,
            updates: 0,
            scratch: Scratch::default(),
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn kind(&self) -> AgentKind {
        self.config.kind
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn layout(&self) -> HeadLayout {
        self.layout
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target_network(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn popart_stats(&self) -> &RunningStats {
        &self.popart
    }

    pub fn loss_weights(&self) -> Option<&LossWeights> {
        self.loss_weights.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon_at(self.frames)
    }

    /// Raw online-network head outputs for one observation, `[heads][actions]`.
    pub fn head_values(&self, observation: &[f64]) -> Result<Vec<f64>> {
        self.online.forward(observation)
    }

    /// Action values in the agent's true value space.
    pub fn action_values(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let q = self.online.forward(observation)?;
        Ok(self.true_action_values(&q))
    }

    fn true_action_values(&self, q: &[f64]) -> Vec<f64> {
        let actions = self.layout.actions;
        match self.config.kind {
            k if k.is_spectral() => (0..actions)
                .map(|a| aggregate(q, self.layout, &self.config.codec, a))
                .collect(),
            AgentKind::DqnTc => q.iter().map(|&v| unsquash(v, &self.config.squash)).collect(),
            AgentKind::Popart => q.iter().map(|&v| self.popart.denormalize(v)).collect(),
            _ => q.to_vec(),
        }
    }

    /// Greedy action. Target compression and Pop-Art use monotone maps of
    /// the raw outputs, so the argmax is taken over true-space values for
    /// spectral and Pop-Art agents and over the squashed outputs for TC.
    pub fn greedy_action(&self, observation: &[f64]) -> Result<usize> {
        let q = self.online.forward(observation)?;
        Ok(match self.config.kind {
            AgentKind::DqnTc => argmax(q.iter().copied()),
            _ => argmax(self.true_action_values(&q)),
        })
    }

    /// Epsilon-greedy action for the current frame. Always consumes one
    /// uniform draw and one random action from the exploration stream.
    pub fn select_action(&mut self, observation: &[f64]) -> Result<usize> {
        let epsilon = self.epsilon();
        let u: f64 = self.explore_rng.gen();
        let random_action = self.explore_rng.gen_range(0..self.layout.actions);
        if u < epsilon {
            return Ok(random_action);
        }
        let greedy = self.greedy_action(observation)?;
        Ok(epsilon_greedy(greedy, epsilon, u, random_action))
    }

    /// Store one step and train when the schedule says so.
    pub fn observe(&mut self, transition: &Transition<'_>) -> Result<Option<TrainMetrics>> {
        self.replay.push(transition)?;
        self.frames += 1;
        let due = self.frames >= self.config.learning_starts && self.frames % self.config.train_period == 0;
        if due && self.replay.len() >= self.config.batch_size && self.replay.can_sample() {
            return self.train_step().map(Some);
        }
        Ok(None)
    }

    /// Training-space targets `[batch][heads]` for `batch` given target-network
    /// outputs `next_q`. Pop-Art targets come back unnormalized.
    fn compute_targets(
        &self,
        batch: &SampledBatch,
        next_q: &[f64],
        targets: &mut Vec<f64>,
        next_values: &mut Vec<f64>,
        decomposed: &mut Vec<f64>,
    ) -> Result<u32> {
        let cfg = &self.config;
        let layout = self.layout;
        let outputs = layout.outputs();
        let gamma = cfg.gamma;
        targets.clear();
        targets.resize(batch.size * layout.heads, 0.0);
        let mut violations = 0;
        for b in 0..batch.size {
            let rewards = batch.segment_rewards(b);
            let terminal = batch.terminal[b];
            let q = &next_q[b * outputs..(b + 1) * outputs];
            match cfg.kind {
                AgentKind::DqnClip | AgentKind::Dqn => {
                    targets[b] = dqn_target(rewards, gamma, terminal, max_value(q.iter().copied()), cfg.kind == AgentKind::DqnClip);
                }
                AgentKind::DqnTc => {
                    targets[b] = tc_target(rewards, gamma, terminal, max_value(q.iter().copied()), &cfg.squash);
                }
                AgentKind::Popart => {
                    let next = self.popart.denormalize(max_value(q.iter().copied()));
                    targets[b] = dqn_target(rewards, gamma, terminal, next, false);
                }
                _ => {
                    next_values.resize(layout.heads, 0.0);
                    spectral_next_values(q, layout, &cfg.codec, cfg.shared_argmax, next_values);
                    let out = &mut targets[b * layout.heads..(b + 1) * layout.heads];
                    spectral_targets(rewards, gamma, terminal, next_values, &cfg.codec, decomposed, out)?;
                    violations += count_bound_violations(rewards, gamma, out, &cfg.codec, decomposed)?;
                }
            }
        }
        Ok(violations)
    }

    /// One optimizer update on a uniformly sampled minibatch.
    pub fn train_step(&mut self) -> Result<TrainMetrics> {
        let mut s = std::mem::take(&mut self.scratch);
        let result = self.train_step_with(&mut s);
        self.scratch = s;
        result
    }

    fn train_step_with(&mut self, s: &mut Scratch) -> Result<TrainMetrics> {
        let bsz = self.config.batch_size;
        self.replay.sample(bsz, &mut self.replay_rng, &mut s.batch)?;
        let next_q = self.target.forward_batch(&s.batch.next_observations, bsz, &mut s.target)?;
        s.next_q.clear();
        s.next_q.extend_from_slice(next_q);
        let violations = self.compute_targets(&s.batch, &s.next_q, &mut s.targets, &mut s.next_values, &mut s.decomposed)?;

        match self.config.kind {
            AgentKind::Popart => {
                let old = self.popart.clone();
                self.popart.update(&s.targets);
                popart_preserve(self.online.final_layer_mut(), &old, &self.popart);
                popart_preserve(self.target.final_layer_mut(), &old, &self.popart);
                for y in s.targets.iter_mut() {
                    *y = self.popart.normalize(*y);
                }
                s.weights.clear();
                s.weights.push(1.0);
            }
            _ => match self.loss_weights.as_mut() {
                Some(w) => {
                    w.observe_targets(&s.targets, &mut s.column);
                    w.weights_into(&mut s.weights);
                }
                None => {
                    s.weights.clear();
                    s.weights.push(1.0);
                }
            },
        }

        let pred = self.online.forward_batch(&s.batch.observations, bsz, &mut s.online)?;
        let loss = head_signals(
            pred,
            &s.batch.actions,
            &s.targets,
            self.layout,
            &s.weights,
            &mut s.final_signal,
            &mut s.hidden_signal,
        );
        let mean_abs_td = s.final_signal.iter().map(|e| e.abs()).sum::<f64>();
        self.grads.zero();
        self.online.backward(&s.online, &s.final_signal, &s.hidden_signal, &mut self.grads);
        self.adam.step(&mut self.online, &self.grads);
        debug_assert!(self.online.all_finite(), "non-finite parameters after update");

        self.updates += 1;
        if self.updates % self.config.target_period == 0 {
            self.target.clone_from(&self.online);
        }
        Ok(TrainMetrics {
            update: self.updates,
            loss,
            mean_abs_td,
            bound_violations: violations,
        })
    }

    /// TD-error samples in true value space from `samples` replay draws.
    ///
    /// Read-only: uses the caller's random stream and touches no agent state.
    pub fn probe_td(&self, rng: &mut ChaCha8Rng, samples: usize) -> Result<Vec<ProbeSample>> {
        if samples == 0 || !self.replay.can_sample() {
            return Ok(Vec::new());
        }
        let mut batch = SampledBatch::default();
        self.replay.sample(samples, rng, &mut batch)?;
        let mut cache = ForwardCache::default();
        let next_q = self.target.forward_batch(&batch.next_observations, samples, &mut cache)?.to_vec();
        let (mut targets, mut next_values, mut decomposed) = (Vec::new(), Vec::new(), Vec::new());
        self.compute_targets(&batch, &next_q, &mut targets, &mut next_values, &mut decomposed)?;
        let pred = self.online.forward_batch(&batch.observations, samples, &mut cache)?;
        let layout = self.layout;
        let outputs = layout.outputs();
        let cfg = &self.config;
        let mut out = Vec::with_capacity(samples);
        for b in 0..samples {
            let a = batch.actions[b];
            let q = &pred[b * outputs..(b + 1) * outputs];
            let (predicted, target) = match cfg.kind {
                k if k.is_spectral() => {
                    let y = &targets[b * layout.heads..(b + 1) * layout.heads];
                    let y_agg: f64 = y.iter().enumerate().map(|(i, v)| cfg.codec.weight(i) * v).sum();
                    (aggregate(q, layout, &cfg.codec, a), y_agg)
                }
                AgentKind::DqnTc => (unsquash(q[a], &cfg.squash), unsquash(targets[b], &cfg.squash)),
                AgentKind::Popart => (self.popart.denormalize(q[a]), targets[b]),
                _ => (q[a], targets[b]),
            };
            out.push(ProbeSample {
                score: batch.scores[b],
                predicted,
                target,
            });
        }
        Ok(out)
    }
}

/// Checks the per-frequency target bound `|y_i| <= 1/(1-gamma)`.
///
/// The reward part of every target is bounded by `(1-gamma^n)/(1-gamma)`
/// whatever the network outputs, so that part is asserted; the full bound
/// also depends on the bootstrap values and is only counted.
fn count_bound_violations(
    rewards: &[f64],
    gamma: f64,
    targets: &[f64],
    codec: &crate::codec::CodecConfig,
    scratch: &mut Vec<f64>,
) -> Result<u32> {
    let limit = 1.0 / (1.0 - gamma);
    if cfg!(debug_assertions) {
        let k = codec.num_components();
        scratch.resize(rewards.len() * k, 0.0);
        for (t, &r) in rewards.iter().enumerate() {
            decompose_into(r, codec, &mut scratch[t * k..(t + 1) * k])?;
        }
        let reward_limit = (1.0 - gamma.powi(rewards.len() as i32)) / (1.0 - gamma) + 1e-9;
        for i in 0..k {
            let part = n_step_return((0..rewards.len()).map(|t| scratch[t * k + i]), gamma, None);
            assert!(part.abs() <= reward_limit, "spectral reward sum {part} exceeds {reward_limit}");
        }
    }
    Ok(targets.iter().filter(|y| y.abs() > limit).count() as u32)
}
