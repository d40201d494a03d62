//! Action sources behind one trait, looked up by name.
//!
//! The evaluator, the troupe simulator and the CLI never care where actions
//! come from: a trained network, the scripted teacher, a uniform random
//! baseline or a static idler all implement [`Controller`]. New sources are
//! added with [`ControllerRegistry::register`].

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, Observation, TwinEnv};
use crate::error::{Error, Result};
use crate::imitation::OracleTeacher;
use crate::policy::{forward, sample, PolicyParams};

pub trait Controller: Send {
    fn name(&self) -> &'static str;

    /// Called right after every `reset`.
    fn begin_episode(&mut self, _env: &TwinEnv, _rng: &mut ChaCha8Rng) {}

    fn act(&mut self, env: &TwinEnv, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action>;
}

/// Inputs a factory may draw on.
#[derive(Debug, Clone, Default)]
pub struct ControllerContext {
    pub params: Option<Arc<PolicyParams>>,
    /// Sample actions instead of taking the distribution mean.
    pub stochastic: bool,
}

pub type ControllerFactory =
    Box<dyn Fn(&ControllerContext) -> Result<Box<dyn Controller>> + Send + Sync>;

pub struct ControllerRegistry {
    factories: BTreeMap<String, ControllerFactory>,
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with `network`, `oracle`, `random` and `idle`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("network", |ctx| {
            let params = ctx.params.clone().ok_or_else(|| {
                Error::Invalid("the network controller needs a checkpoint".into())
            })?;
            Ok(Box::new(NetworkController::new(params, ctx.stochastic)) as Box<dyn Controller>)
        });
        r.register("oracle", |_| {
            Ok(Box::new(OracleTeacher::default()) as Box<dyn Controller>)
        });
        r.register("random", |_| {
            Ok(Box::new(RandomController) as Box<dyn Controller>)
        });
        r.register("idle", |_| {
            Ok(Box::new(IdleController) as Box<dyn Controller>)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&ControllerContext) -> Result<Box<dyn Controller>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, ctx: &ControllerContext) -> Result<Box<dyn Controller>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownController(name.to_string()))?;
        factory(ctx)
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// The policy network, acting at the distribution mean or by sampling.
pub struct NetworkController {
    params: Arc<PolicyParams>,
    stochastic: bool,
}

impl NetworkController {
    pub fn new(params: Arc<PolicyParams>, stochastic: bool) -> Self {
        Self { params, stochastic }
    }
}

impl Controller for NetworkController {
    fn name(&self) -> &'static str {
        "network"
    }

    fn act(&mut self, env: &TwinEnv, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action> {
        let dist = forward(&self.params, obs.as_slice())?;
        if self.stochastic {
            let (s, _) = sample(&dist, rng);
            Ok(s.to_action(env.limits()))
        } else {
            Ok(dist.mean_action(env.limits()))
        }
    }
}

/// Uniformly random speed, turn rate and idle state.
pub struct RandomController;

impl Controller for RandomController {
    fn name(&self) -> &'static str {
        "random"
    }

    fn act(&mut self, env: &TwinEnv, _obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action> {
        let l = env.limits();
        Ok(Action::new(
            rng.random_range(0.0..=l.v_max),
            rng.random_range(-l.omega_max..=l.omega_max),
            rng.random_range(0..4u8),
        ))
    }
}

/// Stands still in idle state 0.
pub struct IdleController;

impl Controller for IdleController {
    fn name(&self) -> &'static str {
        "idle"
    }

    fn act(&mut self, _env: &TwinEnv, _obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<Action> {
        Ok(Action::default())
    }
}
