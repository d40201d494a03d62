use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::motion::{label_motion_states, MotionCounts, MotionFractions};
use crate::controller::{Controller, NetworkController};
use crate::env::{EnvConfig, TwinEnv, ZONE_COUNT};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::reward::{RewardComponents, RewardConfig, RewardLedger};
use crate::seeding;
use crate::trajectory::Trajectory;

/// Everything observed during one evaluation episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub trajectory: Trajectory,
    pub components: RewardComponents,
    pub completed: bool,
    pub dwell: [f64; ZONE_COUNT],
    pub steps: u64,
    pub wall_steps: u64,
}

impl EpisodeRecord {
    pub fn cumulative_reward(&self) -> f64 {
        self.components.total()
    }
}

/// Reset `env` with `seed` and let `controller` act until the episode ends.
///
/// The controller draws from its own stream derived from `seed`.
pub fn run_episode(
    env: &mut TwinEnv,
    controller: &mut dyn Controller,
    reward: &RewardConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    env.set_recording(true);
    let mut rng = seeding::rng_for(seed, 1);
    let mut obs = env.reset(seed);
    controller.begin_episode(env, &mut rng);
    let mut ledger = RewardLedger::new(env.episode_id());
    let mut wall_steps = 0;
    loop {
        let action = controller.act(env, &obs, &mut rng)?;
        let out = env.step(action)?;
        ledger.apply(&out.events, reward)?;
        wall_steps += out.events.wall_contact as u64;
        obs = out.observation;
        if out.done {
            break;
        }
    }
    Ok(EpisodeRecord {
        seed,
        trajectory: env.take_trajectory().expect("recording enabled"),
        components: ledger.components,
        completed: ledger.all_zones_entered(),
        dwell: env.state().dwell_clock,
        steps: env.steps(),
        wall_steps,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_episodes: usize,
    /// Fraction of episodes that entered all zones.
    pub completion_rate: f64,
    pub mean_reward: f64,
    pub components: RewardComponents,
    /// Seconds of dwell credit per zone, averaged over episodes.
    pub mean_dwell: [f64; ZONE_COUNT],
    pub mean_duration: f64,
    pub wall_contact_fraction: f64,
    pub mean_path_length: f64,
    pub motion: MotionFractions,
}

impl EvalReport {
    pub fn from_episodes(episodes: &[EpisodeRecord], dt: f64) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::Invalid(
                "an evaluation needs at least one episode".into(),
            ));
        }
        let n = episodes.len() as f64;
        let mut components = RewardComponents::default();
        let mut dwell = [0.0; ZONE_COUNT];
        let mut motion = MotionCounts::default();
        let (mut reward, mut completed, mut duration, mut path) = (0.0, 0usize, 0.0, 0.0);
        let (mut steps, mut wall_steps) = (0u64, 0u64);
        for e in episodes {
            components.accumulate(&e.components);
            reward += e.cumulative_reward();
            completed += e.completed as usize;
            for (d, x) in dwell.iter_mut().zip(e.dwell) {
                *d += x;
            }
            duration += e.steps as f64 * dt;
            path += e.trajectory.path_length();
            steps += e.steps;
            wall_steps += e.wall_steps;
            motion.add(&label_motion_states(&e.trajectory)?);
        }
        Ok(Self {
            n_episodes: episodes.len(),
            completion_rate: completed as f64 / n,
            mean_reward: reward / n,
            components: components.scaled(1.0 / n),
            mean_dwell: dwell.map(|d| d / n),
            mean_duration: duration / n,
            wall_contact_fraction: if steps == 0 {
                0.0
            } else {
                wall_steps as f64 / steps as f64
            },
            mean_path_length: path / n,
            motion: motion.fractions(),
        })
    }
}

/// Run `n_episodes` seeded episodes, one fresh controller each, in parallel.
///
/// Results are returned in episode order regardless of scheduling.
pub fn evaluate_controller<F>(
    env: &EnvConfig,
    reward: &RewardConfig,
    make_controller: F,
    n_episodes: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<EpisodeRecord>)>
where
    F: Fn() -> Result<Box<dyn Controller>> + Sync,
{
    if n_episodes == 0 {
        return Err(Error::Invalid("n_episodes must be at least 1".into()));
    }
    reward.validate()?;
    let template = TwinEnv::new(env.clone())?;
    let records = (0..n_episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = template.clone();
            let mut controller = make_controller()?;
            let mut rec = run_episode(
                &mut env,
                controller.as_mut(),
                reward,
                seeding::derive_seed(seed, i),
            )?;
            rec.trajectory.episode_id = i;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((EvalReport::from_episodes(&records, env.dt)?, records))
}

/// Evaluate a policy at its distribution mean.
pub fn evaluate_policy(
    params: &PolicyParams,
    env: &EnvConfig,
    reward: &RewardConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    let params = Arc::new(params.clone());
    let (report, _) = evaluate_controller(
        env,
        reward,
        || Ok(Box::new(NetworkController::new(params.clone(), false)) as Box<dyn Controller>),
        n_episodes,
        seed,
    )?;
    Ok(report)
}
