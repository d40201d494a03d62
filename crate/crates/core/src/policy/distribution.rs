use ndarray::ArrayView2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use super::network::forward_batch;
use super::params::{PolicyParams, CONTINUOUS_DIM, IDLE_STATES};
use crate::env::{Action, MotionLimits};
use crate::error::Result;

/// Policy output for one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub mean: [f64; CONTINUOUS_DIM],
    pub std: [f64; CONTINUOUS_DIM],
    pub log_probs: [f64; IDLE_STATES],
    pub value: f64,
}

/// A draw from the policy before clamping to the action ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySample {
    /// Unclamped (speed, turn rate).
    pub raw: [f64; CONTINUOUS_DIM],
    pub idle_state: u8,
}

impl PolicySample {
    pub fn to_action(&self, limits: &MotionLimits) -> Action {
        Action::new(self.raw[0], self.raw[1], self.idle_state).clamped(limits)
    }
}

pub fn log_softmax(logits: &[f64]) -> [f64; IDLE_STATES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    std::array::from_fn(|k| logits[k] - lse)
}

pub fn gaussian_log_density(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - 0.5 * (2.0 * PI).ln()
}

/// Differential entropy of a Gaussian with the given log-std.
pub fn gaussian_entropy(log_std: f64) -> f64 {
    0.5 * (2.0 * PI * E).ln() + log_std
}

pub fn categorical_entropy(log_probs: &[f64]) -> f64 {
    -log_probs
        .iter()
        .map(|&lp| {
            if lp == f64::NEG_INFINITY {
                0.0
            } else {
                lp.exp() * lp
            }
        })
        .sum::<f64>()
}

impl ActionDistribution {
    pub fn probs(&self) -> [f64; IDLE_STATES] {
        self.log_probs.map(f64::exp)
    }

    pub fn most_likely_idle(&self) -> u8 {
        let mut best = 0;
        for k in 1..IDLE_STATES {
            if self.log_probs[k] > self.log_probs[best] {
                best = k;
            }
        }
        best as u8
    }

    /// Deterministic action: the Gaussian mean and the modal idle state.
    pub fn mean_action(&self, limits: &MotionLimits) -> Action {
        PolicySample {
            raw: self.mean,
            idle_state: self.most_likely_idle(),
        }
        .to_action(limits)
    }

    /// Joint log-density (Gaussian part) and log-mass (idle part).
    pub fn log_prob(&self, s: &PolicySample) -> f64 {
        let cont: f64 = (0..CONTINUOUS_DIM)
            .map(|d| gaussian_log_density(s.raw[d], self.mean[d], self.std[d].ln()))
            .sum();
        cont + self.log_probs[s.idle_state as usize]
    }

    pub fn entropy(&self) -> f64 {
        self.std
            .iter()
            .map(|s| gaussian_entropy(s.ln()))
            .sum::<f64>()
            + categorical_entropy(&self.log_probs)
    }
}

pub fn forward(params: &PolicyParams, obs: &[f64]) -> Result<ActionDistribution> {
    let view = ArrayView2::from_shape((1, obs.len()), obs)
        .map_err(|e| crate::Error::Invalid(e.to_string()))?;
    let pass = forward_batch(params, view)?;
    Ok(distribution_row(params, &pass, 0))
}

pub(crate) fn distribution_row(
    params: &PolicyParams,
    pass: &super::ForwardPass,
    row: usize,
) -> ActionDistribution {
    let log_std = params.log_std();
    let logits: Vec<f64> = pass.logits.row(row).to_vec();
    ActionDistribution {
        mean: std::array::from_fn(|d| pass.mean[[row, d]]),
        std: std::array::from_fn(|d| log_std[d].exp()),
        log_probs: log_softmax(&logits),
        value: pass.value[row],
    }
}

/// Draw a stochastic action; the log-probability refers to the unclamped draw.
pub fn sample<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> (PolicySample, f64) {
    let raw: [f64; CONTINUOUS_DIM] = std::array::from_fn(|d| {
        let eps: f64 = rng.sample(StandardNormal);
        dist.mean[d] + dist.std[d] * eps
    });
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut idle = IDLE_STATES - 1;
    for (k, p) in dist.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            idle = k;
            break;
        }
    }
    // never pick a zero-probability tail state through rounding
    while dist.log_probs[idle] == f64::NEG_INFINITY && idle > 0 {
        idle -= 1;
    }
    let s = PolicySample {
        raw,
        idle_state: idle as u8,
    };
    let lp = dist.log_prob(&s);
    (s, lp)
}

/// Log-probability and entropy of `action` under the policy, plus the value estimate.
pub fn log_prob_and_entropy(
    params: &PolicyParams,
    obs: &[f64],
    action: &PolicySample,
) -> Result<(f64, f64, f64)> {
    let dist = forward(params, obs)?;
    Ok((dist.log_prob(action), dist.entropy(), dist.value))
}
