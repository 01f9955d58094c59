use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::network::{Gradients, NetworkParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adaptive-moment optimizer state for one network.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
}

impl OptimizerState {
    pub fn new(net: &NetworkParams, config: AdamConfig) -> Self {
        let zeros = || net.weights().iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        OptimizerState { config, step: 0, first: zeros(), second: zeros() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &Gradients) -> Result<()> {
        if grads.0.len() != self.first.len() {
            return Err(Error::Shape("gradient set does not match optimizer state".into()));
        }
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((w, g), m), v) in params.weights_mut().iter_mut().zip(&grads.0).zip(&mut self.first).zip(&mut self.second) {
            if w.dim() != g.dim() {
                return Err(Error::Shape("gradient shape mismatch".into()));
            }
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
            });
        }
        if params.weights().iter().flat_map(|w| w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("weights after optimizer step {}", self.step)));
        }
        Ok(())
    }
}
