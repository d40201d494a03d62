use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::run_episode;
use crate::controller::Controller;
use crate::env::{EnvConfig, FloorPlan, TwinEnv};
use crate::error::{Error, Result};
use crate::geometry::{mean_pairwise_distance, Vec2};
use crate::reward::RewardConfig;
use crate::seeding;
use crate::trajectory::{Trajectory, TrajectorySample};

/// Seconds between consecutive troupe spawns.
pub const SPAWN_STAGGER: f64 = 3.0;
/// Distance of each scripted NPC from its zone center.
pub const NPC_OFFSET: f64 = 1.5;

/// Mean pairwise distance; 0 for fewer than two points.
pub fn dispersion(points: &[Vec2]) -> f64 {
    mean_pairwise_distance(points)
}

/// Several agents sharing one floor plan on a common clock.
///
/// Agent `i` appears at `start_times[i]` and leaves when its episode ends.
/// Agents do not see or block each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TroupeRun {
    pub n_agents: usize,
    pub dt: f64,
    pub spawn_stagger: f64,
    pub start_times: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// Dispersion of the agents present at each global step.
    pub dispersion: Vec<f64>,
    /// Number of agents present at each global step.
    pub present: Vec<usize>,
}

impl TroupeRun {
    pub fn from_trajectories(
        trajectories: Vec<Trajectory>,
        dt: f64,
        spawn_stagger: f64,
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Invalid("a troupe needs at least one agent".into()));
        }
        for t in &trajectories {
            t.check_dt(dt)?;
        }
        let start_steps: Vec<usize> = (0..trajectories.len())
            .map(|i| (i as f64 * spawn_stagger / dt).round() as usize)
            .collect();
        let end = trajectories
            .iter()
            .zip(&start_steps)
            .map(|(t, s)| s + t.len())
            .max()
            .unwrap_or(0);
        let mut series = Vec::with_capacity(end);
        let mut present = Vec::with_capacity(end);
        let mut points = Vec::with_capacity(trajectories.len());
        for g in 0..end {
            points.clear();
            for (t, &s) in trajectories.iter().zip(&start_steps) {
                if let Some(sample) = g.checked_sub(s).and_then(|k| t.samples.get(k)) {
                    points.push(sample.position);
                }
            }
            series.push(dispersion(&points));
            present.push(points.len());
        }
        Ok(Self {
            n_agents: trajectories.len(),
            dt,
            spawn_stagger,
            start_times: start_steps.iter().map(|&s| s as f64 * dt).collect(),
            trajectories,
            dispersion: series,
            present,
        })
    }

    /// Average dispersion over the steps where at least two agents are present.
    pub fn mean_dispersion(&self) -> f64 {
        let (sum, n) = self
            .dispersion
            .iter()
            .zip(&self.present)
            .filter(|(_, &p)| p >= 2)
            .fold((0.0, 0usize), |(s, n), (d, _)| (s + d, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Run `n_agents` independent controllers with staggered spawns.
pub fn simulate_troupe<F>(
    env: &EnvConfig,
    make_controller: F,
    n_agents: usize,
    seed: u64,
) -> Result<TroupeRun>
where
    F: Fn() -> Result<Box<dyn Controller>> + Sync,
{
    if n_agents == 0 {
        return Err(Error::Invalid("n_agents must be at least 1".into()));
    }
    let template = TwinEnv::new(env.clone())?;
    let reward = RewardConfig::default();
    let trajectories = (0..n_agents as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = template.clone();
            let mut controller = make_controller()?;
            let mut rec = run_episode(
                &mut env,
                controller.as_mut(),
                &reward,
                seeding::derive_seed(seed, i),
            )?;
            rec.trajectory.episode_id = i;
            Ok(rec.trajectory)
        })
        .collect::<Result<Vec<_>>>()?;
    TroupeRun::from_trajectories(trajectories, env.dt, SPAWN_STAGGER)
}

/// Six static agents, two per zone, standing on either side of the zone
/// center and facing it for a whole episode.
pub fn npc_baseline(plan: &FloorPlan, env: &EnvConfig) -> Result<TroupeRun> {
    let steps = env.max_steps() as usize;
    let mut trajectories = Vec::new();
    for zone in &plan.zones {
        for side in [-1.0, 1.0] {
            let position = zone.center + Vec2::new(0.0, side * NPC_OFFSET);
            if !plan.contains(position) {
                return Err(Error::FloorPlan(format!(
                    "NPC position ({:.3}, {:.3}) lies outside the corridor",
                    position.x, position.y
                )));
            }
            let heading = (zone.center - position).angle();
            let id = trajectories.len() as u64;
            trajectories.push(Trajectory {
                episode_id: id,
                samples: (0..=steps)
                    .map(|k| TrajectorySample {
                        t: k as f64 * env.dt,
                        position,
                        heading,
                        idle_state: 0,
                    })
                    .collect(),
            });
        }
    }
    TroupeRun::from_trajectories(trajectories, env.dt, 0.0)
}
