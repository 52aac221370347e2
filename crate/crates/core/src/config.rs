//! Flat experiment configuration with named presets and JSON overlays.

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentKind};
use crate::codec::CodecConfig;
use crate::env::{EnvConfig, EnvKind};
use crate::error::{Error, Result};
use crate::harness::RunOptions;
use crate::nn::AdamConfig;
use crate::transforms::SquashConfig;

/// Every knob of one experiment, in one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub agent: AgentKind,
    pub env: EnvKind,
    pub frames: u64,
    pub seeds: Vec<u64>,

    // environment
    pub width: usize,
    pub height: usize,
    pub score_cap: u32,
    pub phase_threshold: u32,
    pub phase_b_reward: Option<f64>,
    pub phase_b_cap: u32,
    pub tabular_states: usize,
    pub tabular_actions: usize,
    pub tabular_reward_bound: f64,
    pub tabular_horizon: usize,
    pub tabular_seed: u64,

    // spectral codec and target compression
    pub base: f64,
    pub max_frequency: usize,
    pub squash_epsilon: f64,

    // optimizer
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,

    // agent
    pub gamma: f64,
    pub n_step: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_period: u64,
    pub learning_starts: u64,
    pub train_period: u64,
    pub eps_start: f64,
    pub eps_final: f64,
    pub eps_decay_frames: u64,
    pub stats_beta: f64,
    pub sigma_min: f64,
    pub hidden: Vec<usize>,
    pub shared_argmax: bool,
    pub zero_final_layer: Option<bool>,

    // telemetry
    pub telemetry: bool,
    pub probe_period: u64,
    pub probe_samples: usize,
    pub probe_beta: f64,
    pub loss_log_period: u64,
}

pub const PRESETS: [&str; 2] = ["desk", "paper"];

impl ExperimentConfig {
    /// Built-in preset: `desk` (laptop-scale defaults) or `paper` (the
    /// full-scale Atari hyperparameters where they apply).
    pub fn preset(name: &str, agent: AgentKind, env: EnvKind) -> Result<Self> {
        let adam = match name {
            "desk" => AdamConfig::default(),
            "paper" => AdamConfig::paper(),
            other => {
                return Err(Error::UnknownName {
                    kind: "preset",
                    name: other.to_string(),
                })
            }
        };
        let a = AgentConfig {
            adam,
            ..AgentConfig::desk(agent)
        };
        let e = EnvConfig::new(env);
        let opts = RunOptions::new(200_000, 0);
        Ok(Self {
            preset: name.to_string(),
            agent,
            env,
            frames: opts.frames,
            seeds: vec![0],
            width: e.width,
            height: e.height,
            score_cap: e.score_cap,
            phase_threshold: e.phase_threshold,
            phase_b_reward: e.phase_b_reward,
            phase_b_cap: e.phase_b_cap,
            tabular_states: e.tabular_states,
            tabular_actions: e.tabular_actions,
            tabular_reward_bound: e.tabular_reward_bound,
            tabular_horizon: e.tabular_horizon,
            tabular_seed: e.tabular_seed,
            base: a.codec.base(),
            max_frequency: a.codec.max_frequency(),
            squash_epsilon: a.squash.epsilon(),
            learning_rate: a.adam.learning_rate,
            adam_beta1: a.adam.beta1,
            adam_beta2: a.adam.beta2,
            adam_epsilon: a.adam.epsilon,
            gamma: a.gamma,
            n_step: a.n_step,
            replay_capacity: a.replay_capacity,
            batch_size: a.batch_size,
            target_period: a.target_period,
            learning_starts: a.learning_starts,
            train_period: a.train_period,
            eps_start: a.eps_start,
            eps_final: a.eps_final,
            eps_decay_frames: a.eps_decay_frames,
            stats_beta: a.stats_beta,
            sigma_min: a.sigma_min,
            hidden: a.hidden,
            shared_argmax: a.shared_argmax,
            zero_final_layer: a.zero_final_layer,
            telemetry: opts.telemetry,
            probe_period: opts.probe_period,
            probe_samples: opts.probe_samples,
            probe_beta: opts.probe_beta,
            loss_log_period: opts.loss_log_period,
        })
    }

    /// Replace the fields named in `overlay` (a JSON object). Unknown keys
    /// and ill-typed values are errors.
    pub fn overlay(&self, overlay: &serde_json::Value) -> Result<Self> {
        let patch = overlay
            .as_object()
            .ok_or_else(|| Error::InvalidConfig("config overlay must be a JSON object".into()))?;
        let mut base = serde_json::to_value(self)?;
        let fields = base.as_object_mut().expect("config serializes to an object");
        for (k, v) in patch {
            if !fields.contains_key(k) {
                return Err(Error::InvalidConfig(format!("unknown config key `{k}`")));
            }
            fields.insert(k.clone(), v.clone());
        }
        let merged: Self = serde_json::from_value(base)?;
        merged.validate()?;
        Ok(merged)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent_config()?.validate()?;
        self.env_config().build()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn codec(&self) -> Result<CodecConfig> {
        CodecConfig::new(self.base, self.max_frequency)
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        Ok(AgentConfig {
            kind: self.agent,
            gamma: self.gamma,
            n_step: self.n_step,
            replay_capacity: self.replay_capacity,
            batch_size: self.batch_size,
            target_period: self.target_period,
            learning_starts: self.learning_starts,
            train_period: self.train_period,
            eps_start: self.eps_start,
            eps_final: self.eps_final,
            eps_decay_frames: self.eps_decay_frames,
            codec: self.codec()?,
            squash: SquashConfig::new(self.squash_epsilon)?,
            stats_beta: self.stats_beta,
            sigma_min: self.sigma_min,
            hidden: self.hidden.clone(),
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                epsilon: self.adam_epsilon,
            },
            shared_argmax: self.shared_argmax,
            zero_final_layer: self.zero_final_layer,
        })
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            kind: self.env,
            width: self.width,
            height: self.height,
            score_cap: self.score_cap,
            phase_threshold: self.phase_threshold,
            phase_b_reward: self.phase_b_reward,
            phase_b_cap: self.phase_b_cap,
            tabular_states: self.tabular_states,
            tabular_actions: self.tabular_actions,
            tabular_reward_bound: self.tabular_reward_bound,
            tabular_horizon: self.tabular_horizon,
            tabular_seed: self.tabular_seed,
        }
    }

    pub fn run_options(&self, seed: u64) -> RunOptions {
        RunOptions {
            frames: self.frames,
            seed,
            telemetry: self.telemetry,
            probe_period: self.probe_period,
            probe_samples: self.probe_samples,
            probe_beta: self.probe_beta,
            loss_log_period: self.loss_log_period,
        }
    }
}
