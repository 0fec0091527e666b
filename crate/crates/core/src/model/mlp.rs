//! Shared per-point perceptron with rectified hidden layers.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::features::PointFeatures;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_width: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub class_count: usize,
}

impl ModelConfig {
    pub fn new(input_width: usize, class_count: usize) -> Self {
        Self {
            input_width,
            hidden_width: 64,
            hidden_layers: 2,
            class_count,
        }
    }

    /// (fan_in, fan_out) of every dense layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_width];
        widths.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        widths.push(self.class_count);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// fan_in x fan_out
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Weights and biases of every layer. Gradients and optimizer velocity
/// share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub layers: Vec<Dense>,
}

impl ModelParameters {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            layers: config
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Dense {
                    weights: Array2::zeros((i, o)),
                    bias: Array1::zeros(o),
                })
                .collect(),
        }
    }

    /// He-normal weights, zero biases.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let mut params = Self::zeros(config);
        for layer in &mut params.layers {
            let fan_in = layer.weights.nrows();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
            layer.weights.mapv_inplace(|_| normal.sample(rng));
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.layers.last().expect("at least one layer").bias.len()
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            input_width: self.input_width(),
            hidden_width: if self.layers.len() > 1 {
                self.layers[0].weights.ncols()
            } else {
                0
            },
            hidden_layers: self.layers.len() - 1,
            class_count: self.class_count(),
        }
    }

    /// Every scalar in layer order: weights row-major, then bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Logits plus the activations needed to backpropagate through them.
#[derive(Debug, Clone)]
pub struct BackboneOutput {
    /// rows x classes
    pub logits: Array2<f64>,
    /// Input of each layer (the feature matrix first, then rectified hidden states).
    layer_inputs: Vec<Array2<f64>>,
}

impl BackboneOutput {
    /// Rectified-unit on/off pattern of every hidden layer.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.layer_inputs[1..]
            .iter()
            .flat_map(|h| h.iter().map(|&v| v > 0.0))
            .collect()
    }
}

pub fn features_matrix(feats: &PointFeatures) -> Array2<f64> {
    Array2::from_shape_vec((feats.rows, feats.width), feats.values.clone())
        .expect("feature buffer matches its shape")
}

pub fn forward(params: &ModelParameters, feats: &PointFeatures) -> Result<BackboneOutput> {
    if feats.width != params.input_width() {
        return Err(Error::contract(format!(
            "feature width {} does not match model input width {}",
            feats.width,
            params.input_width()
        )));
    }
    Ok(forward_matrix(params, features_matrix(feats)))
}

fn forward_matrix(params: &ModelParameters, input: Array2<f64>) -> BackboneOutput {
    let mut layer_inputs = Vec::with_capacity(params.layers.len());
    let mut x = input;
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = x.dot(&layer.weights);
        z += &layer.bias;
        if l < last {
            z.mapv_inplace(|v| v.max(0.0));
        }
        layer_inputs.push(x);
        x = z;
    }
    BackboneOutput {
        logits: x,
        layer_inputs,
    }
}

/// Gradient of `sum(logits * grad_logits)` with respect to every parameter.
pub fn backward(
    params: &ModelParameters,
    output: &BackboneOutput,
    grad_logits: ArrayView2<f64>,
) -> Result<ModelParameters> {
    if grad_logits.dim() != output.logits.dim() {
        return Err(Error::contract(format!(
            "logit gradient shape {:?} does not match logits {:?}",
            grad_logits.dim(),
            output.logits.dim()
        )));
    }
    let mut grads = params.zeros_like();
    let mut delta = grad_logits.to_owned();
    for l in (0..params.layers.len()).rev() {
        let input = &output.layer_inputs[l];
        grads.layers[l].weights = input.t().dot(&delta);
        grads.layers[l].bias = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&params.layers[l].weights.t());
            // `input` is the rectified output of layer l-1; zero means inactive.
            upstream.zip_mut_with(input, |g, &h| {
                if h <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = upstream;
        }
    }
    Ok(grads)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut probs = logits.to_owned();
    for mut row in probs.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    probs
}

/// Pulls a gradient with respect to probabilities back to the logits:
/// `dL/dz = p * (g - <g, p>)` per row.
pub fn softmax_backward(probs: ArrayView2<f64>, grad_probs: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    for ((p, g), mut o) in probs.rows().into_iter().zip(grad_probs.rows()).zip(out.rows_mut()) {
        let dot = p.dot(&g);
        for ((o, &p), &g) in o.iter_mut().zip(p).zip(g) {
            *o = p * (g - dot);
        }
    }
    out
}
