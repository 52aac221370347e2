//! Bootstrapped training targets for every agent kind, plus the Pop-Art
//! output-preserving rescale and the shared per-head TD signal.

use crate::codec::{decompose_into, CodecConfig};
use crate::error::Result;
use crate::nn::{Dense, HeadLayout};
use crate::transforms::{squash, unsquash, RunningStats, SquashConfig};
use crate::util::{argmax, max_value};

/// `sum_k gamma^k r_k (+ gamma^len(r) * bootstrap)`.
///
/// Every target in the crate goes through this one accumulation so that
/// agents which ought to agree do so bit for bit.
pub fn n_step_return(rewards: impl IntoIterator<Item = f64>, gamma: f64, bootstrap: Option<f64>) -> f64 {
    let mut acc = 0.0;
    let mut discount = 1.0;
    for r in rewards {
        acc += discount * r;
        discount *= gamma;
    }
    match bootstrap {
        Some(q) => acc + discount * q,
        None => acc,
    }
}

/// DQN target, optionally with rewards clipped to `[-1, 1]`.
pub fn dqn_target(rewards: &[f64], gamma: f64, terminal: bool, next_max: f64, clip: bool) -> f64 {
    let bootstrap = (!terminal).then_some(next_max);
    if clip {
        n_step_return(rewards.iter().map(|r| r.clamp(-1.0, 1.0)), gamma, bootstrap)
    } else {
        n_step_return(rewards.iter().copied(), gamma, bootstrap)
    }
}

/// Transformed Bellman target `h(R_n + gamma^n h^-1(max Q~))`, in squashed space.
pub fn tc_target(rewards: &[f64], gamma: f64, terminal: bool, next_max_squashed: f64, cfg: &SquashConfig) -> f64 {
    let bootstrap = (!terminal).then(|| unsquash(next_max_squashed, cfg));
    squash(n_step_return(rewards.iter().copied(), gamma, bootstrap), cfg)
}

/// Per-frequency spectral targets written to `out` (length N+1).
///
/// Each reward is decomposed and then discount-summed per frequency.
/// `next_values[i]` is the bootstrap value already selected for frequency
/// `i`; it is ignored for terminal segments. `scratch` must hold
/// `rewards.len() * (N+1)` values.
pub fn spectral_targets(
    rewards: &[f64],
    gamma: f64,
    terminal: bool,
    next_values: &[f64],
    codec: &CodecConfig,
    scratch: &mut Vec<f64>,
    out: &mut [f64],
) -> Result<()> {
    let k = codec.num_components();
    debug_assert_eq!(out.len(), k);
    scratch.clear();
    scratch.resize(rewards.len() * k, 0.0);
    for (t, &r) in rewards.iter().enumerate() {
        decompose_into(r, codec, &mut scratch[t * k..(t + 1) * k])?;
    }
    for (i, y) in out.iter_mut().enumerate() {
        let bootstrap = (!terminal).then(|| next_values[i]);
        *y = n_step_return((0..rewards.len()).map(|t| scratch[t * k + i]), gamma, bootstrap);
    }
    Ok(())
}

/// Bootstrap value per frequency from one state's head outputs.
///
/// With `shared_argmax` the action maximizing the aggregate
/// `sum_i b^i Q(s', a, i)` is chosen once and used for every frequency;
/// otherwise each frequency takes its own max.
pub fn spectral_next_values(q: &[f64], layout: HeadLayout, codec: &CodecConfig, shared_argmax: bool, out: &mut [f64]) {
    let row = |h: usize| &q[layout.index(h, 0)..layout.index(h, 0) + layout.actions];
    if shared_argmax {
        let best = argmax((0..layout.actions).map(|a| aggregate(q, layout, codec, a)));
        for (h, v) in out.iter_mut().enumerate() {
            *v = row(h)[best];
        }
    } else {
        for (h, v) in out.iter_mut().enumerate() {
            *v = max_value(row(h).iter().copied());
        }
    }
}

/// `sum_i b^i Q(s, a, i)` for one state's head outputs.
pub fn aggregate(q: &[f64], layout: HeadLayout, codec: &CodecConfig, action: usize) -> f64 {
    (0..layout.heads).map(|h| codec.weight(h) * q[layout.index(h, action)]).sum()
}

/// Rescale a Pop-Art output layer so that `sigma * f(x) + mu` is unchanged
/// when the statistics move from `old` to `new`.
pub fn popart_preserve(layer: &mut Dense, old: &RunningStats, new: &RunningStats) {
    let (s_old, s_new) = (old.sigma(), new.sigma());
    let (m_old, m_new) = (old.mean(), new.mean());
    if s_old == s_new && m_old == m_new {
        return;
    }
    let scale = s_old / s_new;
    for w in layer.weights.iter_mut() {
        *w *= scale;
    }
    for b in layer.biases.iter_mut() {
        *b = (s_old * *b + m_old - m_new) / s_new;
    }
}

/// Squared-error signals for the taken actions, shared by all agent kinds.
///
/// `predictions` is `[batch][outputs]`, `targets` is `[batch][heads]`. The
/// final-layer signal is the plain `(Q - y) / batch`; the signal propagated
/// into the hidden layers carries `hidden_weights[h]`. Returns the mean
/// unweighted loss `1/2 sum_h (y - Q)^2`.
pub fn head_signals(
    predictions: &[f64],
    actions: &[usize],
    targets: &[f64],
    layout: HeadLayout,
    hidden_weights: &[f64],
    final_signal: &mut Vec<f64>,
    hidden_signal: &mut Vec<f64>,
) -> f64 {
    let batch = actions.len();
    let outputs = layout.outputs();
    final_signal.clear();
    final_signal.resize(batch * outputs, 0.0);
    hidden_signal.clear();
    hidden_signal.resize(batch * outputs, 0.0);
    let inv_batch = 1.0 / batch as f64;
    let mut loss = 0.0;
    for (b, &a) in actions.iter().enumerate() {
        for h in 0..layout.heads {
            let idx = b * outputs + layout.index(h, a);
            let err = predictions[idx] - targets[b * layout.heads + h];
            loss += 0.5 * err * err;
            final_signal[idx] = err * inv_batch;
            hidden_signal[idx] = hidden_weights[h] * final_signal[idx];
        }
    }
    loss * inv_batch
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::Mlp;

    const G: f64 = 0.99;

    #[test]
    fn dqn_clip_examples() {
        assert_eq!(dqn_target(&[1000.0], G, true, 0.0, true), 1.0);
        let y = dqn_target(&[1.0, 1.0, 1.0], G, true, 0.0, true);
        assert!((y - (1.0 + G + G * G)).abs() < 1e-15);
        let y = dqn_target(&[0.0, 0.0, 0.0], G, false, 7.0, true);
        assert!((y - G.powi(3) * 7.0).abs() < 1e-12);
        // unclipped keeps the raw reward
        assert_eq!(dqn_target(&[1000.0], G, true, 0.0, false), 1000.0);
    }

    #[test]
    fn tc_examples() {
        let cfg = SquashConfig::default();
        assert!((tc_target(&[3.0], G, true, 0.0, &cfg) - 1.03).abs() < 1e-12);
        assert_eq!(tc_target(&[0.0], G, true, 123.0, &cfg), 0.0);
        // gamma = 1, R = 0: h(h^-1(h(5))) = h(5)
        let h5 = squash(5.0, &cfg);
        assert!((tc_target(&[0.0], 1.0, false, h5, &cfg) - h5).abs() < 1e-12);
    }

    #[test]
    fn spectral_terminal_target_is_table_1_components() {
        let codec = CodecConfig::new(2.0, 20).unwrap();
        let mut out = vec![0.0; 21];
        let mut scratch = Vec::new();
        spectral_targets(&[11.0], G, true, &[9.0; 21], &codec, &mut scratch, &mut out).unwrap();
        assert_eq!(&out[..5], &[1.0, 1.0, 1.0, 0.5, 0.0]);
        assert!(out[4..].iter().all(|&y| y == 0.0));
    }

    #[test]
    fn spectral_targets_reconstruct_scalar_target() {
        let codec = CodecConfig::new(2.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut scratch = Vec::new();
        let mut out = vec![0.0; 11];
        for _ in 0..200 {
            let rewards: Vec<f64> = (0..3).map(|_| rng.gen_range(-500.0..500.0)).collect();
            let next: Vec<f64> = (0..11).map(|_| rng.gen_range(-1.0..1.0)).collect();
            spectral_targets(&rewards, G, false, &next, &codec, &mut scratch, &mut out).unwrap();
            let agg: f64 = out.iter().enumerate().map(|(i, y)| codec.weight(i) * y).sum();
            let next_agg: f64 = next.iter().enumerate().map(|(i, q)| codec.weight(i) * q).sum();
            let scalar = dqn_target(&rewards, G, false, next_agg, false);
            assert!((agg - scalar).abs() <= 1e-9 * scalar.abs().max(1.0));
        }
    }

    #[test]
    fn next_value_selection() {
        let codec = CodecConfig::new(2.0, 1).unwrap();
        let layout = HeadLayout { heads: 2, actions: 2 };
        // head 0: (1, 0); head 1: (0, 0.75) -> aggregates (1, 1.5)
        let q = [1.0, 0.0, 0.0, 0.75];
        let mut out = [0.0; 2];
        spectral_next_values(&q, layout, &codec, false, &mut out);
        assert_eq!(out, [1.0, 0.75]);
        spectral_next_values(&q, layout, &codec, true, &mut out);
        assert_eq!(out, [0.0, 0.75]);
    }

    #[test]
    fn popart_preserves_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Mlp::new(&[3, 8, 2], false, &mut rng).unwrap();
        let old = RunningStats::with_moments(1.5, 10.0, 1e-3, 1e-4).unwrap();
        let new = RunningStats::with_moments(1.5, 1.5 * 1.5 + 4.0 * (10.0 - 1.5 * 1.5), 1e-3, 1e-4).unwrap();
        assert!((new.sigma() - 2.0 * old.sigma()).abs() < 1e-12);
        let x = [0.3, -0.2, 0.9];
        let before: Vec<f64> = net.forward(&x).unwrap().iter().map(|&z| old.denormalize(z)).collect();
        popart_preserve(net.final_layer_mut(), &old, &new);
        let after: Vec<f64> = net.forward(&x).unwrap().iter().map(|&z| new.denormalize(z)).collect();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn popart_identity_when_stats_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[2, 4, 3], false, &mut rng).unwrap();
        let copy = net.clone();
        let stats = RunningStats::default();
        popart_preserve(net.final_layer_mut(), &stats, &stats.clone().updated(&[]));
        assert_eq!(net, copy);
    }

    #[test]
    fn head_signal_split() {
        let layout = HeadLayout { heads: 2, actions: 2 };
        let pred = [1.0, 2.0, 3.0, 4.0];
        let targets = [0.0, 0.0];
        let (mut f, mut h) = (Vec::new(), Vec::new());
        let loss = head_signals(&pred, &[1], &targets, layout, &[1.0, 10.0], &mut f, &mut h);
        assert_eq!(loss, 0.5 * (4.0 + 16.0));
        assert_eq!(f, vec![0.0, 2.0, 0.0, 4.0]);
        assert_eq!(h, vec![0.0, 2.0, 0.0, 40.0]);
    }
}
