use super::mlp::ModelParameters;
use crate::error::{Error, Result};

/// SGD with heavy-ball momentum: `v <- mu * v + g`, `theta <- theta - lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplicative learning-rate decay per step; 1.0 keeps it constant.
    pub decay: f64,
    velocity: ModelParameters,
    steps: u64,
}

impl SgdMomentum {
    pub fn new(params: &ModelParameters, learning_rate: f64, momentum: f64) -> Self {
        Self {
            learning_rate,
            momentum,
            decay: 1.0,
            velocity: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn velocity(&self) -> &ModelParameters {
        &self.velocity
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn current_learning_rate(&self) -> f64 {
        self.learning_rate * self.decay.powi(self.steps as i32)
    }

    /// Applies one update. A non-finite gradient leaves parameters and
    /// velocity untouched and returns an error.
    pub fn step(&mut self, params: &mut ModelParameters, grads: &ModelParameters) -> Result<()> {
        if grads.layers.len() != params.layers.len()
            || grads
                .layers
                .iter()
                .zip(&params.layers)
                .any(|(g, p)| g.weights.dim() != p.weights.dim() || g.bias.len() != p.bias.len())
        {
            return Err(Error::contract("gradient shapes do not match parameters"));
        }
        if !grads.is_finite() {
            return Err(Error::Divergence {
                step: self.steps as usize,
                reason: "non-finite gradient".into(),
            });
        }
        let lr = self.current_learning_rate();
        let mu = self.momentum;
        for ((p, v), g) in params
            .iter_mut()
            .zip(self.velocity.iter_mut())
            .zip(grads.iter())
        {
            *v = mu * *v + g;
            *p -= lr * *v;
        }
        self.steps += 1;
        Ok(())
    }
}
