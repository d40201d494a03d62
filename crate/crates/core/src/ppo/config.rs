use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environment steps to consume; whole iterations run until this is reached.
    pub total_steps: u64,
    pub n_envs: usize,
    /// Steps per environment per iteration.
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to zero over training.
    pub lr_decay: bool,
    /// Weight of the cloning loss mixed into each update; 0 disables it.
    pub bc_regularizer: f64,
    /// Multiplier applied to environment rewards before advantage estimation.
    pub reward_scale: f64,
    /// Rescale gradients whose global L2 norm exceeds this; 0 disables it.
    pub max_grad_norm: f64,
    /// Leading iterations that update only the value head.
    pub value_warmup_iterations: usize,
    /// Write a checkpoint every this many iterations; 0 disables it.
    pub checkpoint_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 2_000_000,
            n_envs: 18,
            horizon: 2048,
            epochs: 3,
            minibatch_size: 512,
            gamma: 0.99,
            lambda: 0.95,
            clip_epsilon: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
            learning_rate: 1e-5,
            lr_decay: true,
            bc_regularizer: 0.0,
            reward_scale: 0.01,
            max_grad_norm: 0.5,
            value_warmup_iterations: 2,
            checkpoint_interval: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The reduced run used for desk-scale experiments: 200k steps.
    pub fn desk() -> Self {
        Self {
            total_steps: 200_000,
            ..Self::default()
        }
    }

    pub fn batch_size(&self) -> usize {
        self.n_envs * self.horizon
    }

    pub fn iterations(&self) -> u64 {
        let batch = self.batch_size() as u64;
        if batch == 0 {
            0
        } else {
            self.total_steps.div_ceil(batch)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: &str| Err(Error::Config(format!("ppo.{msg}")));
        if self.n_envs == 0 {
            return err("n_envs must be at least 1");
        }
        if self.horizon == 0 {
            return err("horizon must be at least 1");
        }
        if self.epochs == 0 {
            return err("epochs must be at least 1");
        }
        if self.minibatch_size == 0 || !self.batch_size().is_multiple_of(self.minibatch_size) {
            return Err(Error::Config(format!(
                "ppo.minibatch_size must divide n_envs*horizon = {}",
                self.batch_size()
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return err("gamma must be in (0,1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return err("lambda must be in [0,1]");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return err("clip_epsilon must be in (0,1)");
        }
        for (name, v) in [
            ("value_coef", self.value_coef),
            ("entropy_coef", self.entropy_coef),
            ("bc_regularizer", self.bc_regularizer),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "ppo.{name} must be a non-negative number"
                )));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return err("learning_rate must be positive");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return err("reward_scale must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.batch_size(), 36_864);
        assert_eq!(TrainConfig::desk().iterations(), 6);
        assert_eq!(
            TrainConfig {
                total_steps: 0,
                ..c
            }
            .iterations(),
            0
        );
    }

    #[test]
    fn rejects_bad_values() {
        let bad = TrainConfig {
            gamma: 1.5,
            ..TrainConfig::default()
        };
        assert_eq!(
            bad.validate().unwrap_err().to_string(),
            "ppo.gamma must be in (0,1]"
        );
        let bad = TrainConfig {
            minibatch_size: 500,
            ..TrainConfig::default()
        };
        assert!(bad
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("ppo.minibatch_size"));
    }
}
