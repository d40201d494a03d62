//! Virtual audience training pipeline.
//!
//! A deterministic 2D digital twin of a corridor with three content zones,
//! a reward ledger for zone visits, a small tanh policy network with
//! hand-written reverse-mode gradients, behavioral cloning from scripted
//! teacher demonstrations, PPO fine-tuning, and an evaluation harness for
//! troupes of trained agents.
//!
//! Action sources (the trained network, the scripted teacher, a uniform
//! random baseline, a static idler) all implement [`Controller`] and are
//! looked up by name through a [`ControllerRegistry`].

pub mod config;
pub mod controller;
pub mod env;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod imitation;
pub mod policy;
pub mod ppo;
pub mod reward;
pub mod seeding;
pub mod trajectory;

pub use config::{load_config, RunConfig};
pub use controller::{Controller, ControllerContext, ControllerRegistry};
pub use env::{Action, EnvConfig, FloorPlan, Observation, StepEvents, TwinEnv};
pub use error::{Error, Result};
pub use geometry::Vec2;
pub use policy::{NetLayout, PolicyParams};
pub use reward::{RewardComponents, RewardConfig, RewardLedger};
pub use trajectory::{Trajectory, TrajectorySample};
