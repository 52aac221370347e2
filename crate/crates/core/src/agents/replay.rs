//! Uniform replay with n-step segment assembly.
//!
//! Transitions are stored one environment step at a time with raw scalar
//! rewards, so a single buffer layout serves every agent kind. Segments are
//! assembled at sample time and stop at the first terminal step.

use rand::Rng;

use crate::error::{Error, Result};

/// One environment step as stored in replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<'a> {
    pub observation: &'a [f64],
    pub action: usize,
    pub reward: f64,
    pub next_observation: &'a [f64],
    pub terminal: bool,
    /// Player score in `observation` (telemetry bucket).
    pub score: u32,
    pub phase: u8,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    n_step: usize,
    observations: Vec<f64>,
    next_observations: Vec<f64>,
    actions: Vec<u32>,
    rewards: Vec<f64>,
    terminals: Vec<bool>,
    scores: Vec<u32>,
    phases: Vec<u8>,
    /// Physical slot of the next write.
    head: usize,
    len: usize,
}

/// A minibatch of n-step segments, stored flat.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampledBatch {
    pub size: usize,
    pub n_step: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    /// `[size][n_step]` raw rewards, zero-padded past `steps[b]`.
    pub rewards: Vec<f64>,
    /// Number of real rewards in each segment.
    pub steps: Vec<usize>,
    /// True when the segment ends in a terminal step (no bootstrap).
    pub terminal: Vec<bool>,
    /// Observation `steps[b]` steps after the start.
    pub next_observations: Vec<f64>,
    pub scores: Vec<u32>,
}

impl SampledBatch {
    pub fn segment_rewards(&self, b: usize) -> &[f64] {
        &self.rewards[b * self.n_step..b * self.n_step + self.steps[b]]
    }

    pub fn observation(&self, b: usize) -> &[f64] {
        let dim = self.observations.len() / self.size.max(1);
        &self.observations[b * dim..(b + 1) * dim]
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, n_step: usize) -> Result<Self> {
        if n_step == 0 || capacity <= n_step || obs_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "replay needs capacity > n_step >= 1 and obs_dim > 0 (got {capacity}, {n_step}, {obs_dim})"
            )));
        }
        Ok(Self {
            capacity,
            obs_dim,
            n_step,
            observations: vec![0.0; capacity * obs_dim],
            next_observations: vec![0.0; capacity * obs_dim],
            actions: vec![0; capacity],
            rewards: vec![0.0; capacity],
            terminals: vec![false; capacity],
            scores: vec![0; capacity],
            phases: vec![0; capacity],
            head: 0,
            len: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_step(&self) -> usize {
        self.n_step
    }

    pub fn push(&mut self, t: &Transition<'_>) -> Result<()> {
        for slice in [t.observation, t.next_observation] {
            if slice.len() != self.obs_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.obs_dim,
                    got: slice.len(),
                });
            }
        }
        let p = self.head;
        let d = self.obs_dim;
        self.observations[p * d..(p + 1) * d].copy_from_slice(t.observation);
        self.next_observations[p * d..(p + 1) * d].copy_from_slice(t.next_observation);
        self.actions[p] = t.action as u32;
        self.rewards[p] = t.reward;
        self.terminals[p] = t.terminal;
        self.scores[p] = t.score;
        self.phases[p] = t.phase;
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        Ok(())
    }

    /// Physical slot of logical index `j` (0 = oldest).
    fn physical(&self, j: usize) -> usize {
        (self.head + self.capacity - self.len + j) % self.capacity
    }

    /// Number of steps in the segment starting at logical `j` and whether it
    /// is terminal, or `None` when the segment is not yet complete.
    fn segment(&self, j: usize) -> Option<(usize, bool)> {
        for k in 0..self.n_step {
            if j + k >= self.len {
                return None;
            }
            if self.terminals[self.physical(j + k)] {
                return Some((k + 1, true));
            }
        }
        Some((self.n_step, false))
    }

    /// True when logical index `j` starts a complete segment.
    pub fn is_valid_start(&self, j: usize) -> bool {
        j < self.len && self.segment(j).is_some()
    }

    /// Enough data for at least one complete segment.
    pub fn can_sample(&self) -> bool {
        (0..self.len).rev().take(self.n_step).any(|j| self.is_valid_start(j))
    }

    /// Uniform sample over valid segment starts (rejection sampling).
    pub fn sample(&self, size: usize, rng: &mut impl Rng, out: &mut SampledBatch) -> Result<()> {
        if !self.can_sample() {
            return Err(Error::InvalidConfig("replay has no complete segment to sample".into()));
        }
        let d = self.obs_dim;
        let n = self.n_step;
        out.size = size;
        out.n_step = n;
        out.observations.resize(size * d, 0.0);
        out.next_observations.resize(size * d, 0.0);
        out.actions.resize(size, 0);
        out.rewards.clear();
        out.rewards.resize(size * n, 0.0);
        out.steps.resize(size, 0);
        out.terminal.resize(size, false);
        out.scores.resize(size, 0);
        for b in 0..size {
            let (j, (steps, terminal)) = loop {
                let j = rng.gen_range(0..self.len);
                if let Some(seg) = self.segment(j) {
                    break (j, seg);
                }
            };
            let p0 = self.physical(j);
            out.observations[b * d..(b + 1) * d].copy_from_slice(&self.observations[p0 * d..(p0 + 1) * d]);
            out.actions[b] = self.actions[p0] as usize;
            out.scores[b] = self.scores[p0];
            for k in 0..steps {
                out.rewards[b * n + k] = self.rewards[self.physical(j + k)];
            }
            let last = self.physical(j + steps - 1);
            out.next_observations[b * d..(b + 1) * d]
                .copy_from_slice(&self.next_observations[last * d..(last + 1) * d]);
            out.steps[b] = steps;
            out.terminal[b] = terminal;
        }
        Ok(())
    }

    /// Phase stored with logical index `j`.
    pub fn phase(&self, j: usize) -> u8 {
        self.phases[self.physical(j)]
    }
}
