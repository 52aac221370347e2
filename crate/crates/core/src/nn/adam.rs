use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Added to the root of the second-moment estimate.
    pub epsilon: f64,
}

impl AdamConfig {
    /// Learning rate and stabilizer used for the full-scale Atari runs.
    pub fn paper() -> Self {
        Self {
            learning_rate: 2.5e-5,
            epsilon: 0.005 / 32.0,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 0.005 / 32.0,
        }
    }
}

/// Zero-initialized first/second moment accumulators for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let shapes: Vec<usize> = net.layers().iter().flat_map(|l| [l.weights.len(), l.biases.len()]).collect();
        Self {
            config,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected Adam update with the configured learning rate.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        let lr = self.config.learning_rate;
        self.step_with_lr(net, grads, lr);
    }

    pub fn step_with_lr(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) {
        self.steps += 1;
        let AdamConfig {
            beta1, beta2, epsilon, ..
        } = self.config;
        let t = self.steps as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (((param, grad), m), v) in net
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for k in 0..param.len() {
                let g = grad[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / correction1;
                let v_hat = v[k] / correction2;
                param[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}
