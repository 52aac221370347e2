//! Fully connected ReLU network with manual backpropagation.
//!
//! Weights are stored row-major as `[outputs][inputs]`. Batches are flat
//! row-major `[batch][features]` slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn fan_in_uniform(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || rng.gen_range(-bound..bound);
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let biases = (0..outputs).map(|_| draw()).collect();
        Self {
            inputs,
            outputs,
            weights,
            biases,
        }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }

    fn forward_into(&self, input: &[f64], out: &mut [f64], relu: bool) {
        for (j, o) in out.iter_mut().enumerate() {
            let v = self.biases[j] + dot(self.row(j), input);
            *o = if relu { v.max(0.0) } else { v };
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer activations from the last batched forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    batch: usize,
    /// `activations[0]` is the input batch; `activations[l + 1]` is layer `l`'s output.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zero(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|g| g.fill(0.0));
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b])
    }

    pub fn scale(&mut self, c: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flat_map(|g| g.iter_mut())
            .for_each(|g| *g *= c);
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().flatten().fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl Mlp {
    /// `sizes` lists input, hidden and output widths. Hidden layers use fan-in
    /// uniform init; the output layer is all zeros when `zero_final` is set.
    pub fn new(sizes: &[usize], zero_final: bool, rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "network needs at least input and output widths, all non-zero (got {sizes:?})"
            )));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                if l == last && zero_final {
                    Dense::zeros(w[0], w[1])
                } else {
                    Dense::fan_in_uniform(w[0], w[1], rng)
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs,
                    got: pair[1].inputs,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::InvalidConfig("layer parameter lengths do not match its shape".into()));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn final_layer(&self) -> &Dense {
        self.layers.last().expect("non-empty")
    }

    pub fn final_layer_mut(&mut self) -> &mut Dense {
        self.layers.last_mut().expect("non-empty")
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.final_layer().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn gradients(&self) -> Gradients {
        Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.biases])
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|p| p.is_finite()))
    }

    /// Forward pass for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len(), 1)?;
        let mut current = input.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.outputs];
            layer.forward_into(&current, &mut next, l != last);
            current = next;
        }
        Ok(current)
    }

    fn check_input(&self, len: usize, batch: usize) -> Result<()> {
        let expected = self.input_dim() * batch;
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
        Ok(())
    }

    /// Batched forward pass; returns the `[batch][outputs]` output slice held by `cache`.
    pub fn forward_batch<'c>(&self, inputs: &[f64], batch: usize, cache: &'c mut ForwardCache) -> Result<&'c [f64]> {
        self.check_input(inputs.len(), batch)?;
        cache.batch = batch;
        cache.activations.resize_with(self.layers.len() + 1, Vec::new);
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(inputs);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = cache.activations.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.resize(batch * layer.outputs, 0.0);
            for b in 0..batch {
                layer.forward_into(
                    &input[b * layer.inputs..(b + 1) * layer.inputs],
                    &mut out[b * layer.outputs..(b + 1) * layer.outputs],
                    l != last,
                );
            }
        }
        Ok(cache.output())
    }

    /// Accumulates gradients for the batch in `cache`.
    ///
    /// `final_signal` is dLoss/dOutput as seen by the output layer's own
    /// parameters; `hidden_signal` is the dLoss/dOutput that is propagated
    /// into the hidden layers. Passing the same slice for both gives the
    /// exact gradient of a single loss.
    pub fn backward(&self, cache: &ForwardCache, final_signal: &[f64], hidden_signal: &[f64], grads: &mut Gradients) {
        let batch = cache.batch;
        let n_layers = self.layers.len();
        let out_dim = self.output_dim();
        assert_eq!(final_signal.len(), batch * out_dim, "final signal shape");
        assert_eq!(hidden_signal.len(), batch * out_dim, "hidden signal shape");

        let last = &self.layers[n_layers - 1];
        let input = &cache.activations[n_layers - 1];
        for b in 0..batch {
            let x = &input[b * last.inputs..(b + 1) * last.inputs];
            let delta = &final_signal[b * out_dim..(b + 1) * out_dim];
            for (j, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, x, &mut grads.weights[n_layers - 1][j * last.inputs..(j + 1) * last.inputs]);
                    grads.biases[n_layers - 1][j] += d;
                }
            }
        }
        if n_layers == 1 {
            return;
        }

        let mut delta = hidden_signal.to_vec();
        let mut prev_delta = Vec::new();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let input = &cache.activations[l];
            if l < n_layers - 1 {
                for b in 0..batch {
                    let x = &input[b * layer.inputs..(b + 1) * layer.inputs];
                    let d_row = &delta[b * layer.outputs..(b + 1) * layer.outputs];
                    for (j, &d) in d_row.iter().enumerate() {
                        if d != 0.0 {
                            axpy(d, x, &mut grads.weights[l][j * layer.inputs..(j + 1) * layer.inputs]);
                            grads.biases[l][j] += d;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            // propagate to the previous layer's (post-ReLU) output
            prev_delta.clear();
            prev_delta.resize(batch * layer.inputs, 0.0);
            for b in 0..batch {
                let d_row = &delta[b * layer.outputs..(b + 1) * layer.outputs];
                let p_row = &mut prev_delta[b * layer.inputs..(b + 1) * layer.inputs];
                for (j, &d) in d_row.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, layer.row(j), p_row);
                    }
                }
                let act = &input[b * layer.inputs..(b + 1) * layer.inputs];
                for (p, &a) in p_row.iter_mut().zip(act) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            std::mem::swap(&mut delta, &mut prev_delta);
        }
    }

    /// All parameters as one flat vector, layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for tensor in self.tensors_mut() {
            let n = tensor.len();
            tensor.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}
