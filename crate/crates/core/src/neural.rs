//! Minimal dense-network substrate for the trainer: multilayer perceptrons
//! with tanh hidden layers, exact reverse-mode gradients, a bias-corrected
//! Adam optimizer, and diagonal-Gaussian distribution math. No external ML
//! dependency; everything is plain `f64` vectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum NeuralError {
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("non-finite gradient; update skipped")]
    NonFiniteGradient,
}

fn shape_error(context: impl Into<String>) -> NeuralError {
    NeuralError::ShapeMismatch {
        context: context.into(),
    }
}

/// Dense MLP parameters: per layer a row-major `(fan_out × fan_in)` weight
/// matrix and a bias vector. Hidden activations are tanh, the output layer is
/// identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Scaled-uniform initialization: limit √(6/(fan_in+fan_out)) per layer,
    /// times gain 1 on hidden layers and 0.01 on the output layer so fresh
    /// policies start near their observation-independent center.
    pub fn init(layer_sizes: &[usize], rng: &mut ChaCha8Rng) -> MlpParams {
        assert!(layer_sizes.len() >= 2, "need at least input and output sizes");
        let last = layer_sizes.len() - 2;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let gain = if l == last { 0.01 } else { 1.0 };
            let limit = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..=limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn zeros(layer_sizes: &[usize]) -> MlpParams {
        assert!(layer_sizes.len() >= 2, "need at least input and output sizes");
        MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|p| vec![0.0; p[0] * p[1]])
                .collect(),
            biases: layer_sizes.windows(2).map(|p| vec![0.0; p[1]]).collect(),
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NeuralError> {
        if input.len() != self.layer_sizes[0] {
            return Err(shape_error(format!(
                "input length {} but the network expects {}",
                input.len(),
                self.layer_sizes[0]
            )));
        }
        Ok(())
    }
}

/// Gradients shaped like [`MlpParams`], plus the gradient with respect to the
/// network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(params: &MlpParams) -> GradientBundle {
        GradientBundle {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            input: vec![0.0; params.layer_sizes[0]],
        }
    }

    /// self += other · scale, used to accumulate minibatch gradients.
    pub fn add_scaled(&mut self, other: &GradientBundle, scale: f64) {
        for (mine, theirs) in self.weights.iter_mut().zip(&other.weights) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t * scale;
            }
        }
        for (mine, theirs) in self.biases.iter_mut().zip(&other.biases) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t * scale;
            }
        }
        for (m, t) in self.input.iter_mut().zip(&other.input) {
            *m += t * scale;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for g in w {
                *g *= factor;
            }
        }
        for b in &mut self.biases {
            for g in b {
                *g *= factor;
            }
        }
        for g in &mut self.input {
            *g *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|g| g.is_finite())
            && self.biases.iter().flatten().all(|g| g.is_finite())
            && self.input.iter().all(|g| g.is_finite())
    }
}

/// Forward pass: affine layers with tanh between them, identity at the end.
pub fn forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
    params.check_input(input)?;
    Ok(forward_trace(params, input).pop().expect("at least one layer"))
}

/// Activations after every layer (post-tanh for hidden layers, raw affine
/// for the output layer), in layer order.
fn forward_trace(params: &MlpParams, input: &[f64]) -> Vec<Vec<f64>> {
    let layers = params.layer_count();
    let mut activations = Vec::with_capacity(layers);
    let mut current = input.to_vec();
    for l in 0..layers {
        let fan_in = params.layer_sizes[l];
        let fan_out = params.layer_sizes[l + 1];
        let mut next = vec![0.0; fan_out];
        for o in 0..fan_out {
            let row = &params.weights[l][o * fan_in..(o + 1) * fan_in];
            let mut z = params.biases[l][o];
            for (w, x) in row.iter().zip(&current) {
                z += w * x;
            }
            next[o] = if l + 1 < layers { z.tanh() } else { z };
        }
        activations.push(next.clone());
        current = next;
    }
    activations
}

/// Exact reverse-mode gradients of `output · upstream_gradient` with respect
/// to every weight, bias, and the input.
pub fn backward(
    params: &MlpParams,
    input: &[f64],
    upstream_gradient: &[f64],
) -> Result<GradientBundle, NeuralError> {
    params.check_input(input)?;
    let layers = params.layer_count();
    let out_size = params.layer_sizes[layers];
    if upstream_gradient.len() != out_size {
        return Err(shape_error(format!(
            "upstream gradient length {} but the output has {}",
            upstream_gradient.len(),
            out_size
        )));
    }

    let activations = forward_trace(params, input);
    let mut grads = GradientBundle::zeros_like(params);
    let mut delta = upstream_gradient.to_vec();
    for l in (0..layers).rev() {
        let fan_in = params.layer_sizes[l];
        let fan_out = params.layer_sizes[l + 1];
        let prev: &[f64] = if l == 0 { input } else { &activations[l - 1] };
        for o in 0..fan_out {
            grads.biases[l][o] = delta[o];
            let row = &mut grads.weights[l][o * fan_in..(o + 1) * fan_in];
            for (g, x) in row.iter_mut().zip(prev) {
                *g = delta[o] * x;
            }
        }
        let mut downstream = vec![0.0; fan_in];
        for o in 0..fan_out {
            let row = &params.weights[l][o * fan_in..(o + 1) * fan_in];
            for (d, w) in downstream.iter_mut().zip(row) {
                *d += delta[o] * w;
            }
        }
        if l > 0 {
            for (d, a) in downstream.iter_mut().zip(&activations[l - 1]) {
                *d *= 1.0 - a * a;
            }
        }
        delta = downstream;
    }
    grads.input = delta;
    Ok(grads)
}

/// Adam accumulators shaped like the parameters they update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m_weights: Vec<Vec<f64>>,
    pub v_weights: Vec<Vec<f64>>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &MlpParams, learning_rate: f64) -> AdamState {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam step in place. A non-finite gradient leaves both
/// parameters and optimizer state untouched.
pub fn adam_update(
    params: &mut MlpParams,
    grads: &GradientBundle,
    state: &mut AdamState,
) -> Result<(), NeuralError> {
    if !grads.is_finite() {
        return Err(NeuralError::NonFiniteGradient);
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    let update = |value: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *value -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    };
    for l in 0..params.weights.len() {
        for i in 0..params.weights[l].len() {
            let (w, g) = (&mut params.weights[l][i], grads.weights[l][i]);
            update(w, g, &mut state.m_weights[l][i], &mut state.v_weights[l][i]);
        }
        for i in 0..params.biases[l].len() {
            let (b, g) = (&mut params.biases[l][i], grads.biases[l][i]);
            update(b, g, &mut state.m_biases[l][i], &mut state.v_biases[l][i]);
        }
    }
    Ok(())
}

/// Log-density and differential entropy of a diagonal Gaussian. `log_std` is
/// clamped to `[LOG_STD_MIN, LOG_STD_MAX]` before use.
pub fn gaussian_logprob_entropy(mean: &[f64], log_std: &[f64], sample: &[f64]) -> (f64, f64) {
    debug_assert_eq!(mean.len(), log_std.len());
    debug_assert_eq!(mean.len(), sample.len());
    let mut log_prob = 0.0;
    let mut entropy = 0.0;
    for i in 0..mean.len() {
        let ls = log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let z = (sample[i] - mean[i]) / ls.exp();
        log_prob += -0.5 * z * z - ls - 0.5 * LN_2PI;
        entropy += 0.5 * (1.0 + LN_2PI) + ls;
    }
    (log_prob, entropy)
}

/// Gradients of the Gaussian log-density with respect to the mean and the
/// log-std. The log-std gradient is zero outside the clamp range.
pub fn gaussian_logprob_grad(
    mean: &[f64],
    log_std: &[f64],
    sample: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut d_mean = vec![0.0; mean.len()];
    let mut d_log_std = vec![0.0; mean.len()];
    for i in 0..mean.len() {
        let ls = log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let inv_var = (-2.0 * ls).exp();
        let diff = sample[i] - mean[i];
        d_mean[i] = diff * inv_var;
        let inside = (LOG_STD_MIN..=LOG_STD_MAX).contains(&log_std[i]);
        d_log_std[i] = if inside { diff * diff * inv_var - 1.0 } else { 0.0 };
    }
    (d_mean, d_log_std)
}

/// Draw a sample from the diagonal Gaussian.
pub fn gaussian_sample(mean: &[f64], log_std: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand_distr::StandardNormal;
    mean.iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let noise: f64 = rng.sample(StandardNormal);
            m + ls.clamp(LOG_STD_MIN, LOG_STD_MAX).exp() * noise
        })
        .collect()
}
