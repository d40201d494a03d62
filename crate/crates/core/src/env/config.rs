use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corridor geometry and kinematics. Lengths in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Floor area of the corridor; the length is `area / width`.
    pub area: f64,
    pub width: f64,
    pub zone_spacing: f64,
    /// x coordinate of the first zone center.
    pub first_zone_x: f64,
    /// y coordinate shared by all zone centers.
    pub zone_y: f64,
    /// Floor area of each square content zone.
    pub zone_area: f64,
    pub performance_duration: f64,
    pub spawn: [f64; 2],
    /// Radius of the disk around `spawn` that reset samples from.
    pub spawn_jitter: f64,
    pub exit_x: f64,
    pub wall_margin: f64,
    pub dt: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub episode_seconds: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            area: 208.54,
            width: 5.8,
            zone_spacing: 8.0,
            first_zone_x: 9.0,
            zone_y: 2.9,
            zone_area: 2.8,
            performance_duration: 17.0,
            spawn: [2.0, 2.9],
            spawn_jitter: 0.5,
            exit_x: 33.0,
            wall_margin: 0.3,
            dt: 0.1,
            v_max: 1.5,
            omega_max: 2.0,
            episode_seconds: 240.0,
        }
    }
}

impl EnvConfig {
    pub fn length(&self) -> f64 {
        self.area / self.width
    }

    /// Number of steps after which an episode is cut off.
    pub fn max_steps(&self) -> u64 {
        (self.episode_seconds / self.dt - 1e-9).ceil() as u64
    }

    /// Scalar domain checks. Geometric fit is checked by [`super::build_floorplan`].
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area", self.area),
            ("width", self.width),
            ("zone_spacing", self.zone_spacing),
            ("zone_area", self.zone_area),
            ("performance_duration", self.performance_duration),
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("episode_seconds", self.episode_seconds),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "env.{key} must be a positive number"
                )));
            }
        }
        let non_negative = [
            ("spawn_jitter", self.spawn_jitter),
            ("wall_margin", self.wall_margin),
        ];
        for (key, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("env.{key} must be non-negative")));
            }
        }
        Ok(())
    }
}
