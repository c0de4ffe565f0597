//! Actor-critic multilayer perceptrons with hand-written backpropagation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::env::RLState;
use crate::error::{Error, Result};

pub const HIDDEN: [usize; 3] = [32, 32, 32];
pub const INITIAL_LOG_STD: f64 = -1.0;

/// Fully connected ReLU network with a single linear output.
/// Parameters are stored flat: for each layer its row-major weights, then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations of every layer from a forward pass (input first).
#[derive(Debug, Clone)]
pub struct MlpCache {
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization; the output
    /// layer is further scaled by `output_scale`.
    pub fn new<R: Rng>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(Self::param_count_for(sizes));
        let layers = sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == layers { output_scale } else { 1.0 };
            for _ in 0..fan_in * fan_out + fan_out {
                params.push(rng.gen_range(-bound..bound) * scale);
            }
        }
        Self { sizes: sizes.to_vec(), params }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self { sizes: sizes.to_vec(), params: vec![0.0; Self::param_count_for(sizes)] }
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Schema("network sizes must list at least two positive layer widths".into()));
        }
        if *sizes.last().expect("checked") != 1 {
            return Err(Error::Schema("network must have a single output".into()));
        }
        if params.len() != Self::param_count_for(&sizes) {
            return Err(Error::Schema(format!(
                "expected {} parameters, found {}",
                Self::param_count_for(&sizes),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameter"));
        }
        Ok(Self { sizes, params })
    }

    fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> (f64, MlpCache) {
        let mut activations = vec![input.to_vec()];
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let x = activations.last().expect("input pushed");
            let mut y: Vec<f64> = (0..n_out)
                .map(|j| b[j] + w[j * n_in..(j + 1) * n_in].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(y);
        }
        let out = activations.last().expect("output")[0];
        (out, MlpCache { activations })
    }

    pub fn output(&self, input: &[f64]) -> f64 {
        self.forward(input).0
    }

    /// Accumulate d(loss)/d(params) into `grad`, given d(loss)/d(output).
    pub fn backward(&self, cache: &MlpCache, d_out: f64, grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = vec![d_out];
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &cache.activations[l];
            for j in 0..n_out {
                let row = off + j * n_in;
                for i in 0..n_in {
                    grad[row + i] += delta[j] * x[i];
                }
                grad[off + n_in * n_out + j] += delta[j];
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            delta = (0..n_in)
                .map(|i| {
                    if x[i] <= 0.0 {
                        0.0
                    } else {
                        (0..n_out).map(|j| w[j * n_in + i] * delta[j]).sum()
                    }
                })
                .collect();
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gaussian log density of `x` with mean `mu` and log standard deviation `log_std`.
pub fn gaussian_log_prob(x: f64, mu: f64, log_std: f64) -> f64 {
    let z = (x - mu) * (-log_std).exp();
    -0.5 * z * z - log_std - 0.5 * (2.0 * PI).ln()
}

/// Separate actor (sigmoid-squashed mean) and critic networks plus a global
/// learnable log standard deviation for the action noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    /// Action applied to the environment, in [0, 1].
    pub action: f64,
    /// Unclamped Gaussian sample (equal to the mean when deterministic).
    pub raw_action: f64,
    pub log_prob: f64,
    pub value: f64,
    pub mean: f64,
}

pub fn layer_sizes() -> Vec<usize> {
    let mut sizes = vec![3];
    sizes.extend(HIDDEN);
    sizes.push(1);
    sizes
}

impl PolicyNetwork {
    pub fn new<R: Rng>(rng: &mut R) -> Self {
        let sizes = layer_sizes();
        Self { actor: Mlp::new(&sizes, 0.01, rng), critic: Mlp::new(&sizes, 1.0, rng), log_std: INITIAL_LOG_STD }
    }

    pub fn zeros() -> Self {
        let sizes = layer_sizes();
        Self { actor: Mlp::zeros(&sizes), critic: Mlp::zeros(&sizes), log_std: INITIAL_LOG_STD }
    }

    pub fn mean(&self, state: &RLState) -> f64 {
        sigmoid(self.actor.output(&state.to_array()))
    }

    pub fn value(&self, state: &RLState) -> f64 {
        self.critic.output(&state.to_array())
    }

    pub fn is_finite(&self) -> bool {
        self.log_std.is_finite()
            && self.actor.params().iter().all(|p| p.is_finite())
            && self.critic.params().iter().all(|p| p.is_finite())
    }

    /// Deterministic: the squashed mean. Stochastic: a Gaussian sample around
    /// it (log_prob of the unclamped sample), clamped to [0, 1] for the action.
    pub fn forward<R: Rng>(&self, state: &RLState, rng: Option<&mut R>) -> PolicyOutput {
        let mean = self.mean(state);
        let value = self.value(state);
        let raw_action = match rng {
            Some(rng) => {
                let z: f64 = rng.sample(StandardNormal);
                mean + self.log_std.exp() * z
            }
            None => mean,
        };
        PolicyOutput {
            action: raw_action.clamp(0.0, 1.0),
            raw_action,
            log_prob: gaussian_log_prob(raw_action, mean, self.log_std),
            value,
            mean,
        }
    }

    pub fn act_deterministic(&self, state: &RLState) -> PolicyOutput {
        self.forward::<rand_chacha::ChaCha8Rng>(state, None)
    }
}

/// Derivative of the squashed mean with respect to the actor output.
pub(crate) fn sigmoid_and_slope(z: f64) -> (f64, f64) {
    let s = sigmoid(z);
    (s, s * (1.0 - s))
}
