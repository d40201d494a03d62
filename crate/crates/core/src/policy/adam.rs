use serde::{Deserialize, Serialize};

use super::params::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_config(len, AdamConfig::default())
    }

    pub fn with_config(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Bias-corrected update in place. Parameters are re-quantized to
    /// `f32` precision afterwards.
    pub fn step(&mut self, params: &mut PolicyParams, grads: &[f64], lr: f64) {
        assert_eq!(grads.len(), params.len(), "gradient length mismatch");
        assert_eq!(
            self.m.len(),
            params.len(),
            "optimizer state length mismatch"
        );
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        params.quantize();
    }
}

/// Pure form of [`AdamState::step`].
pub fn optimizer_step(
    params: &PolicyParams,
    grads: &[f64],
    state: &AdamState,
    lr: f64,
) -> (PolicyParams, AdamState) {
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(&mut p, grads, lr);
    (p, s)
}
