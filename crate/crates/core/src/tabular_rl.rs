//! Tabular Q-learning and Spectral Q-learning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{decompose_into, CodecConfig};
use crate::env::TabularMdp;
use crate::error::Result;
use crate::util::{argmax, epsilon_greedy, max_value};

/// Standard action-value table `Q[s][a]`, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_actions: usize,
    values: Vec<f64>,
    alpha: f64,
    gamma: f64,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            num_actions,
            values: vec![0.0; num_states * num_actions],
            alpha,
            gamma,
        }
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.num_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn greedy_action(&self, s: usize) -> usize {
        argmax(self.row(s).iter().copied())
    }

    /// Watkins backup: `Q(s,a) += alpha [r + gamma max_a' Q(s',a') (1 - terminal) - Q(s,a)]`.
    pub fn q_backup(&mut self, s: usize, a: usize, r: f64, next: usize, terminal: bool) {
        let bootstrap = if terminal {
            0.0
        } else {
            max_value(self.row(next).iter().copied())
        };
        let idx = s * self.num_actions + a;
        let q = self.values[idx];
        self.values[idx] = q + self.alpha * (r + self.gamma * bootstrap - q);
    }
}

/// Per-frequency action-value table `Q[s][a][i]`, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralQTable {
    num_actions: usize,
    codec: CodecConfig,
    values: Vec<f64>,
    alpha: f64,
    gamma: f64,
}

impl SpectralQTable {
    pub fn new(num_states: usize, num_actions: usize, codec: CodecConfig, alpha: f64, gamma: f64) -> Self {
        let k = codec.num_components();
        Self {
            num_actions,
            codec,
            values: vec![0.0; num_states * num_actions * k],
            alpha,
            gamma,
        }
    }

    pub fn codec(&self) -> &CodecConfig {
        &self.codec
    }

    fn offset(&self, s: usize, a: usize) -> usize {
        (s * self.num_actions + a) * self.codec.num_components()
    }

    pub fn get(&self, s: usize, a: usize, i: usize) -> f64 {
        self.values[self.offset(s, a) + i]
    }

    pub fn set(&mut self, s: usize, a: usize, i: usize, value: f64) {
        let idx = self.offset(s, a) + i;
        self.values[idx] = value;
    }

    pub fn components(&self, s: usize, a: usize) -> &[f64] {
        let start = self.offset(s, a);
        &self.values[start..start + self.codec.num_components()]
    }

    /// `Q(s,a) = sum_i b^i Q(s,a,i)`
    pub fn aggregate(&self, s: usize, a: usize) -> f64 {
        self.components(s, a)
            .iter()
            .enumerate()
            .map(|(i, q)| self.codec.weight(i) * q)
            .sum()
    }

    pub fn greedy_action(&self, s: usize) -> usize {
        argmax((0..self.num_actions).map(|a| self.aggregate(s, a)))
    }

    /// One Spectral Q-learning update. The bootstrap action is chosen once from
    /// the aggregated values and shared by every frequency.
    pub fn spectral_q_backup(&mut self, s: usize, a: usize, r: f64, next: usize, terminal: bool) -> Result<()> {
        let k = self.codec.num_components();
        let mut rewards = vec![0.0; k];
        decompose_into(r, &self.codec, &mut rewards)?;
        let next_action = self.greedy_action(next);
        let cur = self.offset(s, a);
        let nxt = self.offset(next, next_action);
        for (i, r_i) in rewards.iter().enumerate() {
            let bootstrap = if terminal { 0.0 } else { self.values[nxt + i] };
            let q = self.values[cur + i];
            self.values[cur + i] = q + self.alpha * (r_i + self.gamma * bootstrap - q);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EquivalenceStatus {
    /// Both learners ran for the full step budget.
    Completed,
    /// Some reward exceeds the codec's representable range, so equivalence is not claimed.
    RewardBoundViolated { max_abs_reward: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub status: EquivalenceStatus,
    pub steps: usize,
    /// Max over steps, states and actions of `|Q_std(s,a) - sum_i b^i Q_spec(s,a,i)|`.
    pub max_deviation: f64,
    pub actions_identical: bool,
    pub first_divergence: Option<usize>,
}

impl EquivalenceReport {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.status == EquivalenceStatus::Completed && self.actions_identical && self.max_deviation <= tolerance
    }
}

/// Runs standard and spectral Q-learning side by side on `mdp`.
///
/// Both learners start from zero tables and consume one shared random stream
/// per step (exploration draw, random action, transition draw), so any
/// divergence comes from the values alone.
pub fn check_equivalence(
    mdp: &TabularMdp,
    steps: usize,
    seed: u64,
    codec: &CodecConfig,
    params: LearnerParams,
) -> EquivalenceReport {
    let max_abs_reward = mdp.max_abs_reward();
    let limit = codec.max_representable();
    if max_abs_reward > limit {
        return EquivalenceReport {
            status: EquivalenceStatus::RewardBoundViolated { max_abs_reward, limit },
            steps: 0,
            max_deviation: f64::NAN,
            actions_identical: false,
            first_divergence: None,
        };
    }

    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut standard = QTable::new(ns, na, params.alpha, params.gamma);
    let mut spectral = SpectralQTable::new(ns, na, *codec, params.alpha, params.gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s_std, mut s_spec) = (mdp.start_state(), mdp.start_state());
    let mut t_in_episode = 0;
    let mut max_deviation: f64 = 0.0;
    let mut first_divergence = None;

    for step in 0..steps {
        let u: f64 = rng.gen();
        let random_action = rng.gen_range(0..na);
        let u_next: f64 = rng.gen();

        let a_std = epsilon_greedy(standard.greedy_action(s_std), params.epsilon, u, random_action);
        let a_spec = epsilon_greedy(spectral.greedy_action(s_spec), params.epsilon, u, random_action);
        if first_divergence.is_none() && (a_std != a_spec || s_std != s_spec) {
            first_divergence = Some(step);
        }

        t_in_episode += 1;
        let terminal = t_in_episode >= mdp.horizon();

        let next_std = mdp.next_state(s_std, a_std, u_next);
        standard.q_backup(s_std, a_std, mdp.reward(s_std, a_std), next_std, terminal);
        let next_spec = mdp.next_state(s_spec, a_spec, u_next);
        spectral
            .spectral_q_backup(s_spec, a_spec, mdp.reward(s_spec, a_spec), next_spec, terminal)
            .expect("rewards were checked against the codec bound");

        for s in 0..ns {
            for a in 0..na {
                max_deviation = max_deviation.max((standard.get(s, a) - spectral.aggregate(s, a)).abs());
            }
        }

        if terminal {
            s_std = mdp.start_state();
            s_spec = mdp.start_state();
            t_in_episode = 0;
        } else {
            s_std = next_std;
            s_spec = next_spec;
        }
    }

    EquivalenceReport {
        status: EquivalenceStatus::Completed,
        steps,
        max_deviation,
        actions_identical: first_divergence.is_none(),
        first_divergence,
    }
}

/// Monte-Carlo estimates of the scalar return and of each spectral return for
/// `(state, action)` followed by a uniformly random policy until the horizon.
pub fn monte_carlo_returns(
    mdp: &TabularMdp,
    codec: &CodecConfig,
    gamma: f64,
    state: usize,
    action: usize,
    episodes: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = codec.num_components();
    let mut scalar = 0.0;
    let mut spectral = vec![0.0; k];
    let mut components = vec![0.0; k];
    for _ in 0..episodes {
        let (mut s, mut a) = (state, action);
        let mut discount = 1.0;
        for _ in 0..mdp.horizon() {
            let r = mdp.reward(s, a);
            decompose_into(r, codec, &mut components)?;
            scalar += discount * r;
            for (acc, c) in spectral.iter_mut().zip(&components) {
                *acc += discount * c;
            }
            discount *= gamma;
            s = mdp.next_state(s, a, rng.gen());
            a = rng.gen_range(0..mdp.num_actions());
        }
    }
    let n = episodes as f64;
    Ok((scalar / n, spectral.into_iter().map(|x| x / n).collect()))
}
