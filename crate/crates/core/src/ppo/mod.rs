//! Reward fine-tuning with clipped-surrogate PPO over a batch of environments.

mod config;
mod gae;
mod objective;
mod rollout;
mod select;
mod train;

pub use config::TrainConfig;
pub use gae::{compute_gae, gae, normalize};
pub use objective::{clip_grad_norm, ppo_loss, PpoMinibatch, PpoObjective, PpoTerms};
pub use rollout::{collect_rollouts, EpisodeStat, RolloutBatch, VecEnv};
pub use select::{select_count, select_models, Candidate};
pub use train::{ppo_train, train, write_curve_csv, CurveRow, TrainOutcome, TrainSetup};
