//! Central finite-difference checks of [`Mlp::backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{ForwardCache, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub params_checked: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps vanishing gradients from
/// turning rounding noise into large ratios.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// `0.5 * sum_b sum_o w_o (f_o(x_b) - y_bo)^2`, evaluated one sample at a time.
fn weighted_loss(net: &Mlp, inputs: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    let d_in = net.input_dim();
    let d_out = net.output_dim();
    let batch = inputs.len() / d_in;
    let mut total = 0.0;
    for b in 0..batch {
        let out = net.forward(&inputs[b * d_in..(b + 1) * d_in]).expect("shape");
        for o in 0..d_out {
            let e = out[o] - targets[b * d_out + o];
            total += 0.5 * weights[o] * e * e;
        }
    }
    total
}

fn numeric_gradient(net: &Mlp, loss: impl Fn(&Mlp) -> f64, step: f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut flat = base.clone();
    for k in 0..base.len() {
        flat[k] = base[k] + step;
        probe.set_flat_params(&flat).expect("same shape");
        let up = loss(&probe);
        flat[k] = base[k] - step;
        probe.set_flat_params(&flat).expect("same shape");
        let down = loss(&probe);
        flat[k] = base[k];
        out.push((up - down) / (2.0 * step));
    }
    out
}

struct Problem {
    net: Mlp,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

fn random_problem(sizes: &[usize], batch: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Mlp::new(sizes, false, &mut rng).expect("valid sizes");
    let d_in = sizes[0];
    let d_out = *sizes.last().unwrap();
    let inputs = (0..batch * d_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let targets = (0..batch * d_out).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let weights = (0..d_out).map(|_| rng.gen_range(0.1..3.0)).collect();
    Problem {
        net,
        inputs,
        targets,
        weights,
    }
}

fn analytic(p: &Problem, final_weights: &[f64], hidden_weights: &[f64]) -> Vec<f64> {
    let d_out = p.net.output_dim();
    let batch = p.inputs.len() / p.net.input_dim();
    let mut cache = ForwardCache::default();
    let out = p.net.forward_batch(&p.inputs, batch, &mut cache).expect("shape").to_vec();
    let err: Vec<f64> = out.iter().zip(&p.targets).map(|(f, y)| f - y).collect();
    let signal = |w: &[f64]| -> Vec<f64> { err.iter().enumerate().map(|(k, e)| w[k % d_out] * e).collect() };
    let mut grads = p.net.gradients();
    p.net.backward(&cache, &signal(final_weights), &signal(hidden_weights), &mut grads);
    grads.tensors().flatten().copied().collect()
}

/// Checks the full gradient of a per-output weighted squared loss.
pub fn check_weighted_loss(sizes: &[usize], batch: usize, seed: u64, step: f64) -> GradCheckReport {
    let p = random_problem(sizes, batch, seed);
    let analytic = analytic(&p, &p.weights, &p.weights);
    let numeric = numeric_gradient(&p.net, |n| weighted_loss(n, &p.inputs, &p.targets, &p.weights), step);
    report(&analytic, &numeric)
}

/// Checks the split signal: output-layer parameters must match the unweighted
/// loss, hidden parameters the weighted one.
pub fn check_split_signal(sizes: &[usize], batch: usize, seed: u64, step: f64) -> GradCheckReport {
    let p = random_problem(sizes, batch, seed);
    let ones = vec![1.0; p.net.output_dim()];
    let analytic = analytic(&p, &ones, &p.weights);
    let weighted = numeric_gradient(&p.net, |n| weighted_loss(n, &p.inputs, &p.targets, &p.weights), step);
    let unweighted = numeric_gradient(&p.net, |n| weighted_loss(n, &p.inputs, &p.targets, &ones), step);
    let final_start = p.net.num_params() - {
        let last = p.net.final_layer();
        last.weights.len() + last.biases.len()
    };
    let numeric: Vec<f64> = weighted[..final_start]
        .iter()
        .chain(&unweighted[final_start..])
        .copied()
        .collect();
    report(&analytic, &numeric)
}

fn report(analytic: &[f64], numeric: &[f64]) -> GradCheckReport {
    let max_relative_error = analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max);
    GradCheckReport {
        max_relative_error,
        params_checked: analytic.len(),
    }
}
