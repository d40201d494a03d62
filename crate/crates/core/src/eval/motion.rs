use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::wrap_angle;
use crate::policy::IDLE_STATES;
use crate::trajectory::Trajectory;

/// Slowest speed (m/s) labelled as walking.
pub const WALK_THRESHOLD: f64 = 0.1;
/// Slowest turn rate (rad/s) labelled as turning when not walking.
pub const TURN_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionState {
    Walking,
    Turning,
    Idle(u8),
}

impl fmt::Display for MotionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotionState::Walking => f.write_str("walking"),
            MotionState::Turning => f.write_str("turning"),
            MotionState::Idle(k) => write!(f, "idle-{k}"),
        }
    }
}

/// One label per step between consecutive samples.
///
/// The idle sub-state comes from the sample the step arrives at, which is
/// where the environment records the commanded state.
pub fn label_motion_states(traj: &Trajectory) -> Result<Vec<MotionState>> {
    let Some(dt) = traj.uniform_dt()? else {
        return Ok(Vec::new());
    };
    Ok(traj
        .samples
        .windows(2)
        .map(|w| {
            let speed = w[1].position.distance(w[0].position) / dt;
            let turn = wrap_angle(w[1].heading - w[0].heading) / dt;
            classify(speed, turn, w[1].idle_state)
        })
        .collect())
}

pub(crate) fn classify(speed: f64, turn_rate: f64, idle_state: u8) -> MotionState {
    if speed >= WALK_THRESHOLD {
        MotionState::Walking
    } else if turn_rate.abs() >= TURN_THRESHOLD {
        MotionState::Turning
    } else {
        MotionState::Idle(idle_state)
    }
}

/// Share of labelled steps spent in each state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionFractions {
    pub walking: f64,
    pub idle: f64,
    pub turning: f64,
    pub idle_states: [f64; IDLE_STATES],
}

impl MotionFractions {
    pub fn sum(&self) -> f64 {
        self.walking + self.idle + self.turning
    }
}

pub fn motion_fractions(labels: &[MotionState]) -> MotionFractions {
    let mut counts = MotionCounts::default();
    counts.add(labels);
    counts.fractions()
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MotionCounts {
    walking: usize,
    turning: usize,
    idle: [usize; IDLE_STATES],
}

impl MotionCounts {
    pub(crate) fn add(&mut self, labels: &[MotionState]) {
        for l in labels {
            match *l {
                MotionState::Walking => self.walking += 1,
                MotionState::Turning => self.turning += 1,
                MotionState::Idle(k) => self.idle[(k as usize).min(IDLE_STATES - 1)] += 1,
            }
        }
    }

    pub(crate) fn fractions(&self) -> MotionFractions {
        let idle: usize = self.idle.iter().sum();
        let total = self.walking + self.turning + idle;
        if total == 0 {
            return MotionFractions::default();
        }
        let n = total as f64;
        MotionFractions {
            walking: self.walking as f64 / n,
            idle: idle as f64 / n,
            turning: self.turning as f64 / n,
            idle_states: self.idle.map(|c| c as f64 / n),
        }
    }
}
