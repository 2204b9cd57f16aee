use serde::{Deserialize, Serialize};

use super::{MlpClassifier, Params};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// SGD or Adam with bias correction. Moments are allocated on the first step.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    step: u64,
    moments: Option<(Params, Params)>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        Ok(Self {
            config,
            step: 0,
            moments: None,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut MlpClassifier, grads: &Params) -> Result<()> {
        if !model.params().same_shape(grads) {
            return Err(Error::invalid("gradient shapes do not match the model"));
        }
        self.step += 1;
        let lr = self.config.lr;
        match self.config.kind {
            OptimizerKind::Sgd => {
                let params = model.params_mut();
                for (w, g) in params.weights.iter_mut().zip(&grads.weights) {
                    w.scaled_add(-lr, g);
                }
                for (b, g) in params.biases.iter_mut().zip(&grads.biases) {
                    b.scaled_add(-lr, g);
                }
            }
            OptimizerKind::Adam => {
                let OptimizerConfig { beta1, beta2, eps, .. } = self.config;
                let (m, v) = self
                    .moments
                    .get_or_insert_with(|| (grads.zeros_like(), grads.zeros_like()));
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let g_iter = grads
                    .weights
                    .iter()
                    .zip(&grads.biases)
                    .flat_map(|(w, b)| w.iter().chain(b.iter()));
                for (((theta, m), v), &g) in model
                    .params_mut()
                    .scalars_mut()
                    .zip(m.scalars_mut())
                    .zip(v.scalars_mut())
                    .zip(g_iter)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *theta -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
