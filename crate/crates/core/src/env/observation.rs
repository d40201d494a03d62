use serde::{Deserialize, Serialize};

use super::{FloorPlan, ZONE_COUNT};
use crate::geometry::Vec2;

pub const OBS_DIM: usize = 16;

/// Fixed-layout egocentric observation, every entry roughly in [-1, 1].
///
/// | index  | content                                                   |
/// |--------|-----------------------------------------------------------|
/// | 0..2   | position, mapped from the corridor rectangle to [-1, 1]²  |
/// | 2..4   | heading as (cos, sin)                                     |
/// | 4..10  | per-zone center offset in the agent frame, / length       |
/// | 10..13 | per-zone visited flag                                     |
/// | 13..15 | distance to the lower and upper side walls, / width       |
/// | 15     | elapsed fraction of the episode time limit                |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn zone_offset(&self, zone: usize) -> (f64, f64) {
        (self.0[4 + 2 * zone], self.0[5 + 2 * zone])
    }

    pub fn visited(&self, zone: usize) -> f64 {
        self.0[10 + zone]
    }

    pub fn time_fraction(&self) -> f64 {
        self.0[15]
    }
}

pub fn observation_at(
    plan: &FloorPlan,
    episode_seconds: f64,
    position: Vec2,
    heading: f64,
    visited: [bool; ZONE_COUNT],
    time: f64,
) -> Observation {
    let mut o = [0.0; OBS_DIM];
    o[0] = 2.0 * position.x / plan.length - 1.0;
    o[1] = 2.0 * position.y / plan.width - 1.0;
    o[2] = heading.cos();
    o[3] = heading.sin();
    for (i, zone) in plan.zones.iter().enumerate() {
        let rel = (zone.center - position).to_frame(heading);
        o[4 + 2 * i] = rel.x / plan.length;
        o[5 + 2 * i] = rel.y / plan.length;
        o[10 + i] = if visited[i] { 1.0 } else { 0.0 };
    }
    o[13] = position.y / plan.width;
    o[14] = (plan.width - position.y) / plan.width;
    o[15] = time / episode_seconds;
    Observation(o)
}
