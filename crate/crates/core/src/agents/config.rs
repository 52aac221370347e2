use serde::{Deserialize, Serialize};

use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::transforms::{RunningStats, SquashConfig};

/// The deep agents addressable from experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// DQN with rewards clipped to `[-1, 1]`.
    DqnClip,
    /// DQN on raw rewards; the single-head reference for the one-frequency reduction.
    Dqn,
    /// DQN with target compression (transformed Bellman backup).
    DqnTc,
    Popart,
    Spectral,
    /// Spectral DQN with `w_i = b^i`.
    SpectralExpWeights,
    /// Spectral DQN with `w_i = 1`.
    SpectralFlatWeights,
}

/// Per-frequency loss weighting of the spectral agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    InverseVariance,
    Exponential,
    Flat,
}

impl AgentKind {
    pub const ALL: [AgentKind; 7] = [
        AgentKind::DqnClip,
        AgentKind::Dqn,
        AgentKind::DqnTc,
        AgentKind::Popart,
        AgentKind::Spectral,
        AgentKind::SpectralExpWeights,
        AgentKind::SpectralFlatWeights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::DqnClip => "dqn_clip",
            AgentKind::Dqn => "dqn",
            AgentKind::DqnTc => "dqn_tc",
            AgentKind::Popart => "popart",
            AgentKind::Spectral => "spectral",
            AgentKind::SpectralExpWeights => "spectral_exp_weights",
            AgentKind::SpectralFlatWeights => "spectral_flat_weights",
        }
    }

    pub fn weight_mode(self) -> Option<WeightMode> {
        match self {
            AgentKind::Spectral => Some(WeightMode::InverseVariance),
            AgentKind::SpectralExpWeights => Some(WeightMode::Exponential),
            AgentKind::SpectralFlatWeights => Some(WeightMode::Flat),
            _ => None,
        }
    }

    pub fn is_spectral(self) -> bool {
        self.weight_mode().is_some()
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "agent",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub gamma: f64,
    pub n_step: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Target network refresh period, counted in optimizer updates.
    pub target_period: u64,
    /// Environment steps collected before the first update.
    pub learning_starts: u64,
    /// One update every `train_period` environment steps.
    pub train_period: u64,
    pub eps_start: f64,
    pub eps_final: f64,
    pub eps_decay_frames: u64,
    pub codec: CodecConfig,
    pub squash: SquashConfig,
    pub stats_beta: f64,
    pub sigma_min: f64,
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    /// Bootstrap every frequency from the action maximizing the aggregate value
    /// (as in tabular spectral Q-learning) instead of a max per frequency.
    pub shared_argmax: bool,
    /// Zero the final layer at init. `None` means zero for spectral agents only.
    pub zero_final_layer: Option<bool>,
}

impl AgentConfig {
    /// Desk-scale defaults shared by every agent kind.
    pub fn desk(kind: AgentKind) -> Self {
        Self {
            kind,
            gamma: 0.99f64.powf(1.0 / 3.0),
            n_step: 3,
            replay_capacity: 50_000,
            batch_size: 32,
            target_period: 500,
            learning_starts: 1_000,
            train_period: 4,
            eps_start: 1.0,
            eps_final: 0.01,
            eps_decay_frames: 50_000,
            codec: CodecConfig::default(),
            squash: SquashConfig::default(),
            stats_beta: RunningStats::DEFAULT_BETA,
            sigma_min: RunningStats::DEFAULT_SIGMA_MIN,
            hidden: vec![128, 128],
            adam: AdamConfig::default(),
            shared_argmax: false,
            zero_final_layer: None,
        }
    }

    pub fn zero_final(&self) -> bool {
        self.zero_final_layer.unwrap_or(self.kind.is_spectral())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if self.n_step == 0 {
            return fail("n_step must be at least 1");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return fail("replay_capacity must be at least batch_size > 0");
        }
        if self.replay_capacity <= self.n_step {
            return fail("replay_capacity must exceed n_step");
        }
        if self.target_period == 0 || self.train_period == 0 {
            return fail("target_period and train_period must be positive");
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.eps_start) || !in_unit(self.eps_final) {
            return fail("exploration rates must lie in [0, 1]");
        }
        if !(self.stats_beta > 0.0 && self.stats_beta <= 1.0) {
            return fail("stats_beta must lie in (0, 1]");
        }
        if !(self.sigma_min > 0.0) {
            return fail("sigma_min must be positive");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return fail("hidden layer sizes must be positive");
        }
        if !(self.adam.learning_rate >= 0.0 && self.adam.epsilon > 0.0) {
            return fail("adam learning_rate must be >= 0 and epsilon > 0");
        }
        Ok(())
    }

    /// Linear decay from `eps_start` to `eps_final` over `eps_decay_frames`.
    pub fn epsilon_at(&self, frame: u64) -> f64 {
        if self.eps_decay_frames == 0 || frame >= self.eps_decay_frames {
            return self.eps_final;
        }
        let t = frame as f64 / self.eps_decay_frames as f64;
        self.eps_start + t * (self.eps_final - self.eps_start)
    }
}
