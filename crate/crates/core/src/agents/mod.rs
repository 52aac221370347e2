//! Deep value-based agents: DQN with reward clipping, DQN with target
//! compression, Pop-Art, and Spectral DQN with its loss-weighting ablations.
//!
//! All kinds share one replay layout, one target accumulation, and one
//! squared-error signal path; they differ only in how targets are formed and
//! how the per-head error is weighted before entering the hidden layers.

mod agent;
mod config;
mod replay;
mod targets;
mod weights;

pub use agent::{Agent, ProbeSample, TrainMetrics};
pub use config::{AgentConfig, AgentKind, WeightMode};
pub use replay::{ReplayBuffer, SampledBatch, Transition};
pub use targets::{
    aggregate, dqn_target, head_signals, n_step_return, popart_preserve, spectral_next_values, spectral_targets,
    tc_target,
};
pub use weights::LossWeights;

pub(crate) use agent::stream;
