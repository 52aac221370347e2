//! Falling-ball catch game and its progressive-reward variants.
//!
//! A ball spawns in a random column of the top row and falls one row per
//! step. The paddle sits on the bottom row and moves left, stays, or moves
//! right each step. When the ball reaches the bottom row it is either caught
//! (same column as the paddle) or missed, and a new ball spawns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, Observation, Phase, StepInfo, StepResult};
use crate::error::{Error, Result};

pub const NUM_ACTIONS: usize = 3;
pub const OBSERVATION_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatchCoreConfig {
    pub width: usize,
    pub height: usize,
    pub score_cap: u32,
}

impl CatchCoreConfig {
    fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 2 || self.score_cap == 0 {
            return Err(Error::InvalidConfig(format!(
                "catch grid needs width >= 3, height >= 2, score_cap >= 1 (got {}x{}, cap {})",
                self.width, self.height, self.score_cap
            )));
        }
        Ok(())
    }

    /// Every ball is reachable from any paddle position.
    pub fn is_solvable(&self) -> bool {
        self.height >= self.width
    }
}

impl Default for CatchCoreConfig {
    fn default() -> Self {
        Self {
            width: 7,
            height: 7,
            score_cap: 21,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BallEvent {
    Catch,
    Miss,
}

/// Geometry shared by all catch variants.
#[derive(Debug, Clone)]
struct CatchCore {
    cfg: CatchCoreConfig,
    rng: ChaCha8Rng,
    ball_col: usize,
    ball_row: usize,
    paddle_col: usize,
}

impl CatchCore {
    fn new(cfg: CatchCoreConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(0),
            ball_col: 0,
            ball_row: 0,
            paddle_col: cfg.width / 2,
        })
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.paddle_col = self.cfg.width / 2;
        self.spawn();
    }

    fn spawn(&mut self) {
        self.ball_row = 0;
        self.ball_col = self.rng.gen_range(0..self.cfg.width);
    }

    fn advance(&mut self, action: usize) -> Result<Option<BallEvent>> {
        match action {
            0 => self.paddle_col = self.paddle_col.saturating_sub(1),
            1 => {}
            2 => self.paddle_col = (self.paddle_col + 1).min(self.cfg.width - 1),
            _ => {
                return Err(Error::InvalidAction {
                    action,
                    num_actions: NUM_ACTIONS,
                })
            }
        }
        self.ball_row += 1;
        if self.ball_row < self.cfg.height - 1 {
            return Ok(None);
        }
        let event = if self.ball_col == self.paddle_col {
            BallEvent::Catch
        } else {
            BallEvent::Miss
        };
        self.spawn();
        Ok(Some(event))
    }

    fn observation(&self, score: u32, phase: Phase) -> Observation {
        let w = (self.cfg.width - 1) as f64;
        let h = (self.cfg.height - 1) as f64;
        Observation(vec![
            self.ball_col as f64 / w,
            self.ball_row as f64 / h,
            self.paddle_col as f64 / w,
            (score.min(self.cfg.score_cap) as f64) / self.cfg.score_cap as f64,
            phase.index() as f64,
        ])
    }

    /// Action that moves the paddle toward the ball.
    fn tracking_action(&self) -> usize {
        match self.paddle_col.cmp(&self.ball_col) {
            std::cmp::Ordering::Greater => 0,
            std::cmp::Ordering::Equal => 1,
            std::cmp::Ordering::Less => 2,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Scores {
    player: u32,
    opponent: u32,
    phase_b_catches: u32,
    terminal: bool,
}

/// Catch game whose rewards are multiplied by `2^n`, `n` being the player's current score.
#[derive(Debug, Clone)]
pub struct ExponentialCatch {
    core: CatchCore,
    scores: Scores,
}

impl ExponentialCatch {
    pub fn new(cfg: CatchCoreConfig) -> Result<Self> {
        Ok(Self {
            core: CatchCore::new(cfg)?,
            scores: Scores::default(),
        })
    }

    /// Scripted policy that always tracks the ball.
    pub fn tracking_action(&self) -> usize {
        self.core.tracking_action()
    }

    fn info(&self, delta: i32) -> StepInfo {
        StepInfo {
            player_score: self.scores.player,
            opponent_score: self.scores.opponent,
            phase: Phase::A,
            unexponentiated_delta: delta,
            phase_b_catches: 0,
        }
    }
}

impl Environment for ExponentialCatch {
    fn name(&self) -> &str {
        "exp_catch"
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn observation_dim(&self) -> usize {
        OBSERVATION_DIM
    }

    fn score_cap(&self) -> u32 {
        self.core.cfg.score_cap
    }

    fn max_abs_reward(&self) -> f64 {
        2f64.powi(self.core.cfg.score_cap as i32 - 1)
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.core.reset(seed);
        self.scores = Scores::default();
        self.core.observation(0, Phase::A)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.scores.terminal {
            return Err(Error::StepAfterTerminal);
        }
        let n = self.scores.player;
        let scale = 2f64.powi(n as i32);
        let (reward, delta) = match self.core.advance(action)? {
            None => (0.0, 0),
            Some(BallEvent::Catch) => {
                self.scores.player += 1;
                (scale, 1)
            }
            Some(BallEvent::Miss) => {
                self.scores.opponent += 1;
                (-scale, -1)
            }
        };
        let cap = self.core.cfg.score_cap;
        self.scores.terminal = self.scores.player >= cap || self.scores.opponent >= cap;
        Ok(StepResult {
            observation: self.core.observation(self.scores.player, Phase::A),
            reward,
            terminal: self.scores.terminal,
            info: self.info(delta),
        })
    }

    fn current_score(&self) -> u32 {
        self.scores.player
    }

    fn current_phase(&self) -> Phase {
        Phase::A
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseConfig {
    /// Phase-A score at which phase B begins.
    pub phase_threshold: u32,
    /// Reward per phase-B catch.
    pub phase_b_reward: f64,
    /// Phase-B catches after which the episode ends.
    pub phase_b_cap: u32,
    /// Start in phase B; the first phase-B miss moves to phase A.
    pub reverse: bool,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        Self {
            phase_threshold: 10,
            phase_b_reward: 1000.0,
            phase_b_cap: 100,
            reverse: false,
        }
    }
}

/// Catch game with a +/-1 phase followed by a high-reward phase.
#[derive(Debug, Clone)]
pub struct TwoPhaseCatch {
    name: String,
    core: CatchCore,
    cfg: TwoPhaseConfig,
    scores: Scores,
    phase: Phase,
}

impl TwoPhaseCatch {
    pub fn new(name: &str, core: CatchCoreConfig, cfg: TwoPhaseConfig) -> Result<Self> {
        if !(cfg.phase_b_reward.is_finite() && cfg.phase_b_reward > 0.0) || cfg.phase_b_cap == 0 {
            return Err(Error::InvalidConfig(
                "phase-B reward must be positive and phase-B cap >= 1".into(),
            ));
        }
        if !cfg.reverse && (cfg.phase_threshold == 0 || cfg.phase_threshold > core.score_cap) {
            return Err(Error::InvalidConfig(format!(
                "phase threshold {} must be in 1..={}",
                cfg.phase_threshold, core.score_cap
            )));
        }
        Ok(Self {
            name: name.to_string(),
            core: CatchCore::new(core)?,
            cfg,
            scores: Scores::default(),
            phase: Phase::A,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn tracking_action(&self) -> usize {
        self.core.tracking_action()
    }

    fn initial_phase(&self) -> Phase {
        if self.cfg.reverse {
            Phase::B
        } else {
            Phase::A
        }
    }
}

impl Environment for TwoPhaseCatch {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn observation_dim(&self) -> usize {
        OBSERVATION_DIM
    }

    fn score_cap(&self) -> u32 {
        self.core.cfg.score_cap
    }

    fn max_abs_reward(&self) -> f64 {
        self.cfg.phase_b_reward.max(1.0)
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.core.reset(seed);
        self.scores = Scores::default();
        self.phase = self.initial_phase();
        self.core.observation(0, self.phase)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.scores.terminal {
            return Err(Error::StepAfterTerminal);
        }
        let cap = self.core.cfg.score_cap;
        let event = self.core.advance(action)?;
        let (reward, delta) = match (self.phase, event) {
            (_, None) => (0.0, 0),
            (Phase::A, Some(BallEvent::Catch)) => {
                self.scores.player += 1;
                if self.scores.player >= cap {
                    self.scores.terminal = true;
                } else if !self.cfg.reverse && self.scores.player >= self.cfg.phase_threshold {
                    self.phase = Phase::B;
                }
                (1.0, 1)
            }
            (Phase::A, Some(BallEvent::Miss)) => {
                self.scores.opponent += 1;
                self.scores.terminal = self.scores.opponent >= cap;
                (-1.0, -1)
            }
            (Phase::B, Some(BallEvent::Catch)) => {
                self.scores.phase_b_catches += 1;
                self.scores.terminal = self.scores.phase_b_catches >= self.cfg.phase_b_cap;
                (self.cfg.phase_b_reward, 1)
            }
            (Phase::B, Some(BallEvent::Miss)) => {
                if self.cfg.reverse {
                    self.phase = Phase::A;
                } else {
                    self.scores.terminal = true;
                }
                (0.0, -1)
            }
        };
        Ok(StepResult {
            observation: self.core.observation(self.scores.player, self.phase),
            reward,
            terminal: self.scores.terminal,
            info: StepInfo {
                player_score: self.scores.player,
                opponent_score: self.scores.opponent,
                phase: self.phase,
                unexponentiated_delta: delta,
                phase_b_catches: self.scores.phase_b_catches,
            },
        })
    }

    fn current_score(&self) -> u32 {
        self.scores.player
    }

    fn current_phase(&self) -> Phase {
        self.phase
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Steps with `stay` until the next catch/miss event.
    fn run_to_event<E: Environment>(env: &mut E, action: impl Fn(&E) -> usize) -> StepResult {
        loop {
            let a = action(env);
            let res = env.step(a).unwrap();
            if res.info.unexponentiated_delta != 0 || res.terminal {
                return res;
            }
        }
    }

    /// Moves away from the ball, which always misses on a 7x7 board once the paddle is pinned.
    fn avoid(env: &ExponentialCatch) -> usize {
        if env.core.ball_col >= env.core.cfg.width / 2 {
            0
        } else {
            2
        }
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = ExponentialCatch::new(CatchCoreConfig::default()).unwrap();
        let mut b = ExponentialCatch::new(CatchCoreConfig::default()).unwrap();
        assert_eq!(a.reset(7), b.reset(7));
        for t in 0..200 {
            let action = t % 3;
            let (ra, rb) = (a.step(action).unwrap(), b.step(action).unwrap());
            assert_eq!(ra, rb);
            if ra.terminal {
                break;
            }
        }
        let obs = a.reset(3);
        assert_eq!(a.scores.player, 0);
        assert_eq!(a.scores.opponent, 0);
        assert!(obs.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn exponential_rewards_follow_score() {
        let mut env = ExponentialCatch::new(CatchCoreConfig::default()).unwrap();
        env.reset(1);
        let first = run_to_event(&mut env, |e| e.tracking_action());
        assert_eq!(first.reward, 1.0);
        run_to_event(&mut env, |e| e.tracking_action());
        run_to_event(&mut env, |e| e.tracking_action());
        let fourth = run_to_event(&mut env, |e| e.tracking_action());
        assert_eq!(fourth.reward, 8.0);
        assert_eq!(fourth.info.player_score, 4);
    }

    #[test]
    fn miss_costs_current_scale() {
        let mut env = ExponentialCatch::new(CatchCoreConfig::default()).unwrap();
        env.reset(5);
        run_to_event(&mut env, |e| e.tracking_action());
        run_to_event(&mut env, |e| e.tracking_action());
        let miss = run_to_event(&mut env, avoid);
        assert_eq!(miss.info.unexponentiated_delta, -1);
        assert_eq!(miss.reward, -4.0);
        assert_eq!(miss.info.opponent_score, 1);
    }

    #[test]
    fn perfect_play_earns_geometric_sum() {
        let mut env = ExponentialCatch::new(CatchCoreConfig::default()).unwrap();
        env.reset(11);
        let (mut total, mut unexp) = (0.0, 0);
        loop {
            let res = env.step(env.tracking_action()).unwrap();
            total += res.reward;
            unexp += res.info.unexponentiated_delta;
            if res.terminal {
                break;
            }
        }
        assert_eq!(total, 2_097_151.0);
        assert_eq!(unexp, 21);
        assert!(matches!(env.step(1), Err(Error::StepAfterTerminal)));
    }

    #[test]
    fn unexponentiated_bookkeeping() {
        let mut env = ExponentialCatch::new(CatchCoreConfig::default()).unwrap();
        env.reset(2);
        let mut delta_sum = 0;
        let mut t = 0usize;
        let last = loop {
            // Mix of tracking and idling gives both catches and misses.
            let a = if (t / 40) % 2 == 0 { env.tracking_action() } else { 1 };
            t += 1;
            let res = env.step(a).unwrap();
            delta_sum += res.info.unexponentiated_delta;
            if res.terminal {
                break res;
            }
        };
        assert_eq!(
            delta_sum,
            last.info.player_score as i32 - last.info.opponent_score as i32
        );
        assert!(last.info.opponent_score > 0);
    }

    #[test]
    fn invalid_action_rejected() {
        let mut env = ExponentialCatch::new(CatchCoreConfig::default()).unwrap();
        env.reset(0);
        assert!(matches!(env.step(3), Err(Error::InvalidAction { .. })));
    }

    #[test]
    fn invalid_geometry_rejected() {
        let cfg = CatchCoreConfig {
            width: 2,
            ..CatchCoreConfig::default()
        };
        assert!(ExponentialCatch::new(cfg).is_err());
    }

    fn two_phase(reward: f64, reverse: bool) -> TwoPhaseCatch {
        TwoPhaseCatch::new(
            "two_phase",
            CatchCoreConfig::default(),
            TwoPhaseConfig {
                phase_b_reward: reward,
                reverse,
                ..TwoPhaseConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn phase_switch_after_threshold() {
        let mut env = two_phase(1000.0, false);
        env.reset(3);
        for k in 1..=10 {
            let res = run_to_event(&mut env, |e| e.tracking_action());
            assert_eq!(res.reward, 1.0);
            let expected = if k == 10 { Phase::B } else { Phase::A };
            assert_eq!(res.info.phase, expected);
            assert_eq!(res.observation.as_slice()[4], expected.index() as f64);
        }
        let b = run_to_event(&mut env, |e| e.tracking_action());
        assert_eq!(b.reward, 1000.0);
        assert_eq!(b.info.phase_b_catches, 1);
        // first phase-B miss ends the episode
        let miss = run_to_event(&mut env, |e| if e.core.ball_col >= 3 { 0 } else { 2 });
        assert!(miss.terminal);
        assert_eq!(miss.info.unexponentiated_delta, -1);
    }

    #[test]
    fn phase_a_miss_is_minus_one() {
        let mut env = two_phase(1000.0, false);
        env.reset(8);
        let miss = run_to_event(&mut env, |e| if e.core.ball_col >= 3 { 0 } else { 2 });
        assert_eq!(miss.reward, -1.0);
        assert!(!miss.terminal);
    }

    #[test]
    fn easier_variant_scales_phase_b() {
        let mut env = two_phase(100.0, false);
        env.reset(4);
        for _ in 0..10 {
            run_to_event(&mut env, |e| e.tracking_action());
        }
        assert_eq!(run_to_event(&mut env, |e| e.tracking_action()).reward, 100.0);
    }

    #[test]
    fn phase_b_cap_terminates() {
        let mut env = TwoPhaseCatch::new(
            "two_phase",
            CatchCoreConfig::default(),
            TwoPhaseConfig {
                phase_b_cap: 3,
                ..TwoPhaseConfig::default()
            },
        )
        .unwrap();
        env.reset(0);
        let mut total = 0.0;
        loop {
            let res = env.step(env.tracking_action()).unwrap();
            total += res.reward;
            if res.terminal {
                assert_eq!(res.info.phase_b_catches, 3);
                break;
            }
        }
        assert_eq!(total, 10.0 + 3000.0);
    }

    #[test]
    fn reverse_starts_in_phase_b() {
        let mut env = two_phase(1000.0, true);
        let obs = env.reset(9);
        assert_eq!(env.phase(), Phase::B);
        assert_eq!(obs.as_slice()[4], 1.0);
        let miss = run_to_event(&mut env, |e| if e.core.ball_col >= 3 { 0 } else { 2 });
        assert!(!miss.terminal);
        assert_eq!(miss.info.phase, Phase::A);
        assert_eq!(run_to_event(&mut env, |e| e.tracking_action()).reward, 1.0);
    }
}
