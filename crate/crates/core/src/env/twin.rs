use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{
    build_floorplan, observation_at, wall_contact, EnvConfig, FloorPlan, Observation, ZONE_COUNT,
};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::seeding;
use crate::trajectory::{Trajectory, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl From<&EnvConfig> for MotionLimits {
    fn from(cfg: &EnvConfig) -> Self {
        Self {
            v_max: cfg.v_max,
            omega_max: cfg.omega_max,
        }
    }
}

/// Locomotion command plus the idle animation sub-state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// m/s, in [0, v_max].
    pub speed: f64,
    /// rad/s, in [-omega_max, omega_max].
    pub turn_rate: f64,
    /// One of four idle animations; never affects the pose.
    pub idle_state: u8,
}

impl Action {
    pub fn new(speed: f64, turn_rate: f64, idle_state: u8) -> Self {
        Self {
            speed,
            turn_rate,
            idle_state,
        }
    }

    pub fn clamped(self, limits: &MotionLimits) -> Self {
        let finite_or_zero = |v: f64| if v.is_finite() { v } else { 0.0 };
        Self {
            speed: finite_or_zero(self.speed).clamp(0.0, limits.v_max),
            turn_rate: finite_or_zero(self.turn_rate).clamp(-limits.omega_max, limits.omega_max),
            idle_state: self.idle_state.min(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    /// Radians in (-pi, pi].
    pub heading: f64,
    /// Seconds since episode start.
    pub time: f64,
    /// First-entry flags; never reset within an episode.
    pub visited: [bool; ZONE_COUNT],
    /// Rewarded dwell so far per zone, capped at the performance duration.
    pub dwell_clock: [f64; ZONE_COUNT],
    pub done: bool,
}

/// Every rewardable thing that happened during one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    pub episode: u64,
    pub entered_zone_first_time: Option<usize>,
    pub inside_zone: Option<usize>,
    /// Newly credited dwell seconds, `<= dt`.
    pub dwell_credit: f64,
    pub moved_closer_to_target: bool,
    pub wall_contact: bool,
    pub all_zones_just_completed: bool,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub events: StepEvents,
    pub done: bool,
}

/// One agent in the corridor.
///
/// The environment is a plain value: many instances can run side by side
/// with no shared state, and `reset(seed)` fully determines the episode's
/// stochastic start.
#[derive(Debug, Clone)]
pub struct TwinEnv {
    config: EnvConfig,
    plan: FloorPlan,
    limits: MotionLimits,
    max_steps: u64,
    state: AgentState,
    steps: u64,
    episodes_started: u64,
    episode: u64,
    recording: Option<Trajectory>,
    record: bool,
}

impl TwinEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        let plan = build_floorplan(&config)?;
        let state = AgentState {
            position: plan.spawn_point,
            heading: 0.0,
            time: 0.0,
            visited: [false; ZONE_COUNT],
            dwell_clock: [0.0; ZONE_COUNT],
            done: true,
        };
        Ok(Self {
            limits: MotionLimits::from(&config),
            max_steps: config.max_steps(),
            config,
            plan,
            state,
            steps: 0,
            episodes_started: 0,
            episode: 0,
            recording: None,
            record: false,
        })
    }

    /// Keep a [`Trajectory`] of every episode from the next reset on.
    pub fn set_recording(&mut self, record: bool) {
        self.record = record;
        if !record {
            self.recording = None;
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn plan(&self) -> &FloorPlan {
        &self.plan
    }

    pub fn limits(&self) -> &MotionLimits {
        &self.limits
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn max_steps(&self) -> u64 {
        self.max_steps
    }

    pub fn episode_id(&self) -> u64 {
        self.episode
    }

    pub fn is_done(&self) -> bool {
        self.state.done
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.recording.as_ref()
    }

    pub fn take_trajectory(&mut self) -> Option<Trajectory> {
        self.recording.take()
    }

    /// Place the agent near the spawn point with a uniformly random heading.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = seeding::rng_for(seed, 0);
        let radius = self.config.spawn_jitter * rng.random::<f64>().sqrt();
        let angle = rng.random_range(-PI..PI);
        let heading = wrap_angle(rng.random_range(-PI..PI));
        let position = self
            .plan
            .clamp(self.plan.spawn_point + Vec2::from_polar(radius, angle));

        self.episode = self.episodes_started;
        self.episodes_started += 1;
        self.steps = 0;
        self.state = AgentState {
            position,
            heading,
            time: 0.0,
            visited: [false; ZONE_COUNT],
            dwell_clock: [0.0; ZONE_COUNT],
            done: false,
        };
        if self.record {
            self.recording = Some(Trajectory {
                episode_id: self.episode,
                samples: vec![TrajectorySample {
                    t: 0.0,
                    position,
                    heading,
                    idle_state: 0,
                }],
            });
        }
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let s = &self.state;
        observation_at(
            &self.plan,
            self.config.episode_seconds,
            s.position,
            s.heading,
            s.visited,
            s.time,
        )
    }

    /// Index of the unvisited zone whose center is nearest to `p`.
    pub fn target_zone(&self, p: Vec2) -> Option<usize> {
        nearest_unvisited(&self.plan, &self.state.visited, p)
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::EpisodeDone);
        }
        let a = action.clamped(&self.limits);
        let dt = self.config.dt;
        let prev = self.state.position;
        let target = self.target_zone(prev);

        let heading = wrap_angle(self.state.heading + a.turn_rate * dt);
        let position = self
            .plan
            .clamp(prev + Vec2::from_polar(a.speed * dt, heading));

        self.steps += 1;
        let s = &mut self.state;
        s.heading = heading;
        s.position = position;
        s.time = self.steps as f64 * dt;

        let inside_zone = self.plan.zone_at(position);
        let mut entered_zone_first_time = None;
        let mut all_zones_just_completed = false;
        let mut dwell_credit = 0.0;
        if let Some(i) = inside_zone {
            if !s.visited[i] {
                s.visited[i] = true;
                entered_zone_first_time = Some(i);
                all_zones_just_completed = s.visited.iter().all(|&v| v);
            }
            let cap = self.plan.zones[i].performance_duration;
            dwell_credit = dt.min(cap - s.dwell_clock[i]).max(0.0);
            s.dwell_clock[i] += dwell_credit;
        }
        let moved_closer_to_target = target.is_some_and(|i| {
            let c = self.plan.zones[i].center;
            position.distance(c) < prev.distance(c)
        });
        let wall = wall_contact(&self.plan, position);

        let all_visited = s.visited.iter().all(|&v| v);
        s.done = self.steps >= self.max_steps || (all_visited && position.x > self.plan.exit_x);

        if let Some(traj) = self.recording.as_mut() {
            traj.samples.push(TrajectorySample {
                t: s.time,
                position,
                heading,
                idle_state: a.idle_state,
            });
        }

        let events = StepEvents {
            episode: self.episode,
            entered_zone_first_time,
            inside_zone,
            dwell_credit,
            moved_closer_to_target,
            wall_contact: wall,
            all_zones_just_completed,
            dt,
        };
        let done = s.done;
        Ok(StepOutcome {
            observation: self.observe(),
            events,
            done,
        })
    }
}

pub(crate) fn nearest_unvisited(
    plan: &FloorPlan,
    visited: &[bool; ZONE_COUNT],
    p: Vec2,
) -> Option<usize> {
    plan.zones
        .iter()
        .filter(|z| !visited[z.index])
        .min_by(|a, b| p.distance(a.center).total_cmp(&p.distance(b.center)))
        .map(|z| z.index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> TwinEnv {
        TwinEnv::new(EnvConfig::default()).unwrap()
    }

    fn place(env: &mut TwinEnv, x: f64, y: f64, heading: f64) {
        env.state.position = Vec2::new(x, y);
        env.state.heading = heading;
    }

    #[test]
    fn reset_is_deterministic_and_near_spawn() {
        let mut a = env();
        let mut b = env();
        assert_eq!(a.reset(7), b.reset(7));
        assert_eq!(a.state(), b.state());
        for seed in 0..200 {
            a.reset(seed);
            assert!(a.state().position.distance(a.plan().spawn_point) <= 0.5 + 1e-12);
            assert_eq!(a.state().visited, [false; 3]);
            assert_eq!(a.state().dwell_clock, [0.0; 3]);
            assert!(a.state().heading > -PI && a.state().heading <= PI);
        }
    }

    #[test]
    fn straight_line_kinematics() {
        let mut e = env();
        e.reset(0);
        place(&mut e, 9.0, 2.9, 0.0);
        e.step(Action::new(1.0, 0.0, 0)).unwrap();
        let p = e.state().position;
        assert!((p.x - 9.1).abs() < 1e-12 && (p.y - 2.9).abs() < 1e-12);
    }

    #[test]
    fn first_entry_and_dwell_cap() {
        let mut e = env();
        e.reset(0);
        place(&mut e, 8.1, 2.9, 0.0);
        let out = e.step(Action::new(1.5, 0.0, 0)).unwrap();
        assert_eq!(out.events.entered_zone_first_time, Some(0));
        assert_eq!(out.events.inside_zone, Some(0));
        assert!((out.events.dwell_credit - 0.1).abs() < 1e-12);
        assert!(out.events.moved_closer_to_target);

        e.state.dwell_clock[0] = 17.0;
        let out = e.step(Action::new(0.0, 0.0, 1)).unwrap();
        assert_eq!(out.events.entered_zone_first_time, None);
        assert_eq!(out.events.inside_zone, Some(0));
        assert_eq!(out.events.dwell_credit, 0.0);
        // target switched to zone 1 and the agent did not move
        assert!(!out.events.moved_closer_to_target);
    }

    #[test]
    fn idle_state_does_not_move_agent() {
        let mut a = env();
        let mut b = env();
        a.reset(3);
        b.reset(3);
        a.step(Action::new(0.7, 0.3, 0)).unwrap();
        b.step(Action::new(0.7, 0.3, 3)).unwrap();
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn walls_clamp_position() {
        let mut e = env();
        e.reset(0);
        place(&mut e, 10.0, 0.05, -PI / 2.0);
        let out = e.step(Action::new(1.5, 0.0, 0)).unwrap();
        assert_eq!(e.state().position.y, 0.0);
        assert!(out.events.wall_contact);
    }

    #[test]
    fn horizon_terminates_and_done_is_sticky() {
        let mut e = env();
        e.reset(1);
        let mut n = 0;
        loop {
            n += 1;
            if e.step(Action::new(0.0, 0.0, 0)).unwrap().done {
                break;
            }
        }
        assert_eq!(n, 2400);
        assert!((e.state().time - 240.0).abs() < 1e-9);
        assert!(matches!(e.step(Action::default()), Err(Error::EpisodeDone)));
    }

    #[test]
    fn exit_after_completion_ends_episode() {
        let mut e = env();
        e.reset(0);
        e.state.visited = [true; 3];
        place(&mut e, 32.95, 2.9, 0.0);
        let out = e.step(Action::new(1.0, 0.0, 0)).unwrap();
        assert!(out.done);
    }

    #[test]
    fn completion_fires_once() {
        let mut e = env();
        e.reset(0);
        e.state.visited = [true, true, false];
        place(&mut e, 24.0, 2.9, 0.0);
        let mut completions = 0;
        for _ in 0..30 {
            let out = e.step(Action::new(1.0, 0.0, 0)).unwrap();
            completions += out.events.all_zones_just_completed as usize;
        }
        assert_eq!(completions, 1);
    }

    #[test]
    fn observation_layout() {
        let mut e = env();
        e.reset(0);
        place(&mut e, 9.0, 2.9, 0.4);
        let o = e.observe();
        assert_eq!(o.zone_offset(0), (0.0, 0.0));
        assert!((o.0[2] - 0.4f64.cos()).abs() < 1e-15);
        e.state.visited = [true; 3];
        let o = e.observe();
        assert_eq!((o.visited(0), o.visited(1), o.visited(2)), (1.0, 1.0, 1.0));
        e.state.time = 120.0;
        assert_eq!(e.observe().time_fraction(), 0.5);
        let o = e.observe();
        assert!(o.0.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        assert!((o.0[13] - 0.5).abs() < 1e-12 && (o.0[14] - 0.5).abs() < 1e-12);
    }
}
