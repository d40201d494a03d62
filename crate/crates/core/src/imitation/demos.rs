use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::OracleTeacher;
use crate::controller::Controller;
use crate::env::{
    observation_at, Action, EnvConfig, FloorPlan, MotionLimits, Observation, TwinEnv, ZONE_COUNT,
};
use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use crate::seeding;
use crate::trajectory::{self, Trajectory};

/// Size of the recorded human tracking set the pipeline is modeled on.
pub const HUMAN_TRIALS: usize = 60;
pub const HUMAN_TRACKING_SECONDS: f64 = 3.0 * 3600.0 + 21.0 * 60.0;
pub const HUMAN_TRIAL_SECONDS: f64 = HUMAN_TRACKING_SECONDS / HUMAN_TRIALS as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoSource {
    SyntheticOracle,
    Imported,
}

/// Demonstration tracks sharing one sample spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    pub episodes: Vec<Trajectory>,
    pub sample_dt: f64,
    pub source: DemoSource,
}

impl DemoDataset {
    pub fn from_trajectories(episodes: Vec<Trajectory>, source: DemoSource) -> Result<Self> {
        let mut sample_dt = None;
        for traj in &episodes {
            if let Some(dt) = traj.uniform_dt()? {
                match sample_dt {
                    None => sample_dt = Some(dt),
                    Some(prev) if (prev - dt).abs() > 1e-9 => {
                        return Err(Error::Trajectory(format!(
                            "episode {} is sampled every {dt} s, others every {prev} s",
                            traj.episode_id
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        let sample_dt = sample_dt.ok_or_else(|| {
            Error::Trajectory("dataset has no episode with two or more samples".into())
        })?;
        Ok(Self {
            episodes,
            sample_dt,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.episodes.iter().map(Trajectory::duration).sum()
    }

    /// Every sample inside the corridor.
    pub fn validate(&self, plan: &FloorPlan) -> Result<()> {
        for traj in &self.episodes {
            traj.check_dt(self.sample_dt)?;
            if let Some((k, s)) = traj
                .samples
                .iter()
                .enumerate()
                .find(|(_, s)| !s.position.is_finite() || !plan.contains(s.position))
            {
                return Err(Error::Trajectory(format!(
                    "episode {} sample {k} at ({}, {}) lies outside the corridor",
                    traj.episode_id, s.position.x, s.position.y
                )));
            }
        }
        Ok(())
    }

    /// Largest heading change between consecutive samples, ignoring the first step.
    pub fn max_heading_step(&self) -> f64 {
        self.episodes
            .iter()
            .flat_map(|t| t.samples.windows(2).skip(1))
            .map(|w| wrap_angle(w[1].heading - w[0].heading).abs())
            .fold(0.0, f64::max)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let episodes = trajectory::read_jsonl(BufReader::new(File::open(path)?))?;
        Self::from_trajectories(episodes, DemoSource::Imported)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        trajectory::write_jsonl(BufWriter::new(File::create(path)?), &self.episodes, false)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        trajectory::write_csv(BufWriter::new(File::create(path)?), &self.episodes)
    }
}

/// Roll out the scripted teacher for `n_episodes` seeded episodes.
pub fn generate_oracle_demos(cfg: &EnvConfig, n_episodes: usize, seed: u64) -> Result<DemoDataset> {
    if n_episodes == 0 {
        return Err(Error::Invalid(
            "at least one demonstration episode is required".into(),
        ));
    }
    let template = TwinEnv::new(cfg.clone())?;
    let episodes = (0..n_episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = template.clone();
            env.set_recording(true);
            let episode_seed = seeding::derive_seed(seed, i);
            let mut rng = seeding::rng_for(episode_seed, 1);
            let mut teacher = OracleTeacher::default();
            let mut obs = env.reset(episode_seed);
            teacher.begin_episode(&env, &mut rng);
            loop {
                let action = teacher.act(&env, &obs, &mut rng)?;
                let out = env.step(action)?;
                obs = out.observation;
                if out.done {
                    break;
                }
            }
            let mut traj = env.take_trajectory().expect("recording enabled");
            traj.episode_id = i;
            Ok(traj)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DemoDataset {
        episodes,
        sample_dt: cfg.dt,
        source: DemoSource::SyntheticOracle,
    })
}

/// Recover the per-step commands that move a track from sample to sample.
pub fn derive_actions(traj: &Trajectory, dt: f64, limits: &MotionLimits) -> Result<Vec<Action>> {
    traj.check_dt(dt)?;
    Ok(traj
        .samples
        .windows(2)
        .map(|w| {
            let speed = w[1].position.distance(w[0].position) / dt;
            let turn = wrap_angle(w[1].heading - w[0].heading) / dt;
            Action::new(speed, turn, w[1].idle_state).clamped(limits)
        })
        .collect())
}

/// Supervised pair for behavioral cloning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledTransition {
    pub observation: Observation,
    pub action: Action,
}

/// Pair every sample (except the last) with the command that led to the next one.
///
/// Visited flags are rebuilt from zone containment along the track, so the
/// observations match what the environment would have produced.
pub fn labeled_transitions(
    traj: &Trajectory,
    plan: &FloorPlan,
    cfg: &EnvConfig,
) -> Result<Vec<LabeledTransition>> {
    let actions = derive_actions(traj, cfg.dt, &MotionLimits::from(cfg))?;
    let mut visited = [false; ZONE_COUNT];
    let t0 = traj.samples.first().map_or(0.0, |s| s.t);
    Ok(traj
        .samples
        .iter()
        .zip(actions)
        .map(|(s, action)| {
            if let Some(i) = plan.zone_at(s.position) {
                visited[i] = true;
            }
            LabeledTransition {
                observation: observation_at(
                    plan,
                    cfg.episode_seconds,
                    s.position,
                    s.heading,
                    visited,
                    s.t - t0,
                ),
                action,
            }
        })
        .collect())
}
