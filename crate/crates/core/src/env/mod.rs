//! Progressive-reward environments.
//!
//! All environments are deterministic given the seed passed to `reset` and
//! the action sequence.

mod catch;
mod tabular;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use catch::{CatchCoreConfig, ExponentialCatch, TwoPhaseCatch, TwoPhaseConfig};
pub use tabular::{generate_tabular_mdp, TabularEnv, TabularMdp};

/// Low-dimensional observation vector; every entry lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Low-reward skill phase.
    A,
    /// High-reward phase.
    B,
}

impl Phase {
    pub fn index(self) -> u8 {
        match self {
            Phase::A => 0,
            Phase::B => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub player_score: u32,
    pub opponent_score: u32,
    pub phase: Phase,
    /// +1 for a catch, -1 for a miss, 0 otherwise.
    pub unexponentiated_delta: i32,
    /// Catches made in phase B during this episode.
    pub phase_b_catches: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    /// Raw, unclipped reward.
    pub reward: f64,
    pub terminal: bool,
    pub info: StepInfo,
}

pub trait Environment: Send {
    fn name(&self) -> &str;

    fn num_actions(&self) -> usize;

    fn observation_dim(&self) -> usize;

    /// Number of score buckets used for telemetry; scores are in `0..score_cap`.
    fn score_cap(&self) -> u32;

    /// Largest reward magnitude the environment can emit.
    fn max_abs_reward(&self) -> f64;

    fn reset(&mut self, seed: u64) -> Observation;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    /// Player score in the current state, before the next step.
    fn current_score(&self) -> u32;

    fn current_phase(&self) -> Phase;
}

/// Environment selection as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    ExpCatch,
    TwoPhase,
    TwoPhaseEasier,
    TwoPhaseEvenEasier,
    TwoPhaseReverse,
    TabularRandom,
}

impl EnvKind {
    pub const ALL: [EnvKind; 6] = [
        EnvKind::ExpCatch,
        EnvKind::TwoPhase,
        EnvKind::TwoPhaseEasier,
        EnvKind::TwoPhaseEvenEasier,
        EnvKind::TwoPhaseReverse,
        EnvKind::TabularRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::ExpCatch => "exp_catch",
            EnvKind::TwoPhase => "two_phase",
            EnvKind::TwoPhaseEasier => "two_phase_easier",
            EnvKind::TwoPhaseEvenEasier => "two_phase_even_easier",
            EnvKind::TwoPhaseReverse => "two_phase_reverse",
            EnvKind::TabularRandom => "tabular_random",
        }
    }

    /// Phase-B reward per catch for the two-phase family.
    pub fn phase_b_reward(self) -> Option<f64> {
        match self {
            EnvKind::TwoPhase | EnvKind::TwoPhaseReverse => Some(1000.0),
            EnvKind::TwoPhaseEasier => Some(100.0),
            EnvKind::TwoPhaseEvenEasier => Some(10.0),
            _ => None,
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "environment",
                name: s.to_string(),
            })
    }
}

/// Everything needed to build any of the named environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub width: usize,
    pub height: usize,
    pub score_cap: u32,
    pub phase_threshold: u32,
    /// Overrides the per-variant phase-B reward when set.
    pub phase_b_reward: Option<f64>,
    pub phase_b_cap: u32,
    pub tabular_states: usize,
    pub tabular_actions: usize,
    pub tabular_reward_bound: f64,
    pub tabular_horizon: usize,
    /// Seed for the MDP structure itself (not the episode stream).
    pub tabular_seed: u64,
}

impl EnvConfig {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            kind,
            width: 7,
            height: 7,
            score_cap: 21,
            phase_threshold: 10,
            phase_b_reward: None,
            phase_b_cap: 100,
            tabular_states: 8,
            tabular_actions: 3,
            tabular_reward_bound: 15.0,
            tabular_horizon: 25,
            tabular_seed: 0,
        }
    }

    fn core(&self) -> CatchCoreConfig {
        CatchCoreConfig {
            width: self.width,
            height: self.height,
            score_cap: self.score_cap,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self.kind {
            EnvKind::ExpCatch => Box::new(ExponentialCatch::new(self.core())?),
            EnvKind::TabularRandom => {
                let mdp = generate_tabular_mdp(
                    self.tabular_states,
                    self.tabular_actions,
                    self.tabular_reward_bound,
                    self.tabular_seed,
                )?
                .with_horizon(self.tabular_horizon)?;
                Box::new(TabularEnv::new(mdp))
            }
            kind => {
                let reward = self
                    .phase_b_reward
                    .or(kind.phase_b_reward())
                    .expect("two-phase kinds define a phase-B reward");
                Box::new(TwoPhaseCatch::new(
                    kind.name(),
                    self.core(),
                    TwoPhaseConfig {
                        phase_threshold: self.phase_threshold,
                        phase_b_reward: reward,
                        phase_b_cap: self.phase_b_cap,
                        reverse: kind == EnvKind::TwoPhaseReverse,
                    },
                )?)
            }
        })
    }
}
