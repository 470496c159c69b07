use serde::{Deserialize, Serialize};

use super::ModelParameters;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay applied to weight matrices, not biases.
    pub weight_decay: f64,
    step: u64,
    first: ModelParameters,
    second: ModelParameters,
}

/// Optimizer constants, kept with the training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConstants {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConstants {
    fn default() -> Self {
        AdamConstants {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Adam {
    pub fn new(params: &ModelParameters, learning_rate: f64, c: AdamConstants) -> Self {
        Adam {
            learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            weight_decay: 0.0,
            step: 0,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ModelParameters, grads: &ModelParameters) {
        self.step += 1;
        let t = self.step as i32;
        let lr_t = self.learning_rate * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        let eps_t = self.epsilon * (1.0 - self.beta2.powi(t)).sqrt();
        let (b1, b2) = (self.beta1, self.beta2);
        let shrink = 1.0 - self.learning_rate * self.weight_decay;
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.first.blocks_mut())
            .zip(self.second.blocks_mut());
        for (block, (((p, g), m), v)) in blocks.enumerate() {
            // even blocks are weights, odd blocks biases
            if block % 2 == 0 && shrink != 1.0 {
                p.iter_mut().for_each(|p| *p *= shrink);
            }
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                p[i] -= lr_t * m[i] / (v[i].sqrt() + eps_t);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let dims = ModelDims {
            text_dim: 2,
            state_in: 3,
            state_dim: 2,
            hidden: 2,
        };
        let mut params = ModelParameters::zeros(dims);
        let mut grads = params.zeros_like();
        grads.trunk.bias[0] = 0.5;
        grads.trunk.bias[1] = -3.0;
        let mut opt = Adam::new(&params, 0.01, AdamConstants::default());
        opt.update(&mut params, &grads);
        assert!((params.trunk.bias[0] + 0.01).abs() < 1e-9);
        assert!((params.trunk.bias[1] - 0.01).abs() < 1e-9);
        assert_eq!(params.emotion.bias, vec![0.0; 7]);
        assert_eq!(opt.steps(), 1);
    }
}
