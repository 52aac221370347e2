//! Spectral reward decomposition for value-based reinforcement learning.

pub mod agents;
pub mod codec;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod nn;
pub mod plot;
pub mod tabular_rl;
pub mod transforms;
pub mod util;
pub mod verify;

pub use error::{Error, Result};
