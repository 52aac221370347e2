//! From-scratch multilayer perceptron, Adam, and gradient verification.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod qnet;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{Dense, ForwardCache, Gradients, Mlp};
pub use qnet::HeadLayout;
