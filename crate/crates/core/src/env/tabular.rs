//! Seeded random finite MDPs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Environment, Observation, Phase, StepInfo, StepResult};
use crate::error::{Error, Result};

/// Finite episodic MDP with deterministic rewards `R(s, a)` and stochastic transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    /// Row-major `[s][a][s']`.
    transitions: Vec<f64>,
    /// Row-major `[s][a]`.
    rewards: Vec<f64>,
    start_state: usize,
    horizon: usize,
}

pub const DEFAULT_HORIZON: usize = 25;

/// Builds a random MDP; rewards are uniform in `[-reward_bound, reward_bound]`.
pub fn generate_tabular_mdp(
    num_states: usize,
    num_actions: usize,
    reward_bound: f64,
    seed: u64,
) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::InvalidConfig(format!(
            "MDP needs at least one state and action (got {num_states} x {num_actions})"
        )));
    }
    if !(reward_bound.is_finite() && reward_bound >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "reward bound must be finite and non-negative, got {reward_bound}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        let row: Vec<f64> = (0..num_states).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = row.iter().sum();
        transitions.extend(row.into_iter().map(|w| w / total));
    }
    let rewards = (0..num_states * num_actions)
        .map(|_| rng.gen_range(-1.0..=1.0) * reward_bound)
        .collect();
    let start_state = rng.gen_range(0..num_states);
    Ok(TabularMdp {
        num_states,
        num_actions,
        transitions,
        rewards,
        start_state,
        horizon: DEFAULT_HORIZON,
    })
}

impl TabularMdp {
    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidConfig("MDP horizon must be >= 1".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    /// Inverse-CDF sample of the next state from a uniform draw `u` in `[0, 1)`.
    pub fn next_state(&self, s: usize, a: usize, u: f64) -> usize {
        let mut acc = 0.0;
        for (next, p) in self.transition_row(s, a).iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        self.num_states - 1
    }
}

/// A [`TabularMdp`] behind the [`Environment`] trait with one-hot observations.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: TabularMdp,
    rng: ChaCha8Rng,
    state: usize,
    t: usize,
    terminal: bool,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp) -> Self {
        let state = mdp.start_state;
        Self {
            mdp,
            rng: ChaCha8Rng::seed_from_u64(0),
            state,
            t: 0,
            terminal: false,
        }
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    fn observation(&self) -> Observation {
        let mut v = vec![0.0; self.mdp.num_states];
        v[self.state] = 1.0;
        Observation(v)
    }
}

impl Environment for TabularEnv {
    fn name(&self) -> &str {
        "tabular_random"
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions
    }

    fn observation_dim(&self) -> usize {
        self.mdp.num_states
    }

    fn score_cap(&self) -> u32 {
        1
    }

    fn max_abs_reward(&self) -> f64 {
        self.mdp.max_abs_reward()
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = self.mdp.start_state;
        self.t = 0;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.terminal {
            return Err(Error::StepAfterTerminal);
        }
        if action >= self.mdp.num_actions {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.mdp.num_actions,
            });
        }
        let reward = self.mdp.reward(self.state, action);
        self.state = self.mdp.next_state(self.state, action, self.rng.gen());
        self.t += 1;
        self.terminal = self.t >= self.mdp.horizon;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
            info: StepInfo {
                player_score: 0,
                opponent_score: 0,
                phase: Phase::A,
                unexponentiated_delta: 0,
                phase_b_catches: 0,
            },
        })
    }

    fn current_score(&self) -> u32 {
        0
    }

    fn current_phase(&self) -> Phase {
        Phase::A
    }
}
