use serde::{Deserialize, Serialize};

use super::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const ZONE_COUNT: usize = 3;

/// Square floor region that starts a performance when entered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentZone {
    pub index: usize,
    pub center: Vec2,
    pub half_side: f64,
    pub performance_duration: f64,
}

impl ContentZone {
    /// Closed square test: the boundary counts as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        zone_contains(self, p)
    }
}

pub fn zone_contains(zone: &ContentZone, p: Vec2) -> bool {
    p.chebyshev(zone.center) <= zone.half_side
}

/// Axis-aligned rectangular corridor `[0, length] x [0, width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub length: f64,
    pub width: f64,
    pub zones: [ContentZone; ZONE_COUNT],
    pub spawn_point: Vec2,
    pub exit_x: f64,
    pub wall_margin: f64,
}

impl FloorPlan {
    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.length).contains(&p.x) && (0.0..=self.width).contains(&p.y)
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.length), p.y.clamp(0.0, self.width))
    }

    /// Distance to the closest of the four walls.
    pub fn wall_distance(&self, p: Vec2) -> f64 {
        p.x.min(self.length - p.x).min(p.y).min(self.width - p.y)
    }

    pub fn zone_at(&self, p: Vec2) -> Option<usize> {
        self.zones.iter().position(|z| z.contains(p))
    }
}

pub fn wall_contact(plan: &FloorPlan, p: Vec2) -> bool {
    plan.wall_distance(p) < plan.wall_margin
}

pub fn build_floorplan(config: &EnvConfig) -> Result<FloorPlan> {
    config.validate()?;
    let length = config.length();
    let width = config.width;
    let half_side = config.zone_area.sqrt() / 2.0;

    let zones: [ContentZone; ZONE_COUNT] = std::array::from_fn(|index| ContentZone {
        index,
        center: Vec2::new(
            config.first_zone_x + index as f64 * config.zone_spacing,
            config.zone_y,
        ),
        half_side,
        performance_duration: config.performance_duration,
    });

    for zone in &zones {
        let c = zone.center;
        if c.x - half_side < 0.0
            || c.x + half_side > length
            || c.y - half_side < 0.0
            || c.y + half_side > width
        {
            return Err(Error::FloorPlan(format!(
                "zone {} centered at ({:.3}, {:.3}) does not fit inside the {:.3} x {:.3} corridor",
                zone.index, c.x, c.y, length, width
            )));
        }
    }
    if config.zone_spacing <= 2.0 * half_side {
        return Err(Error::FloorPlan(format!(
            "zone spacing {} m makes zones of side {:.4} m overlap",
            config.zone_spacing,
            2.0 * half_side
        )));
    }

    let spawn_point = Vec2::new(config.spawn[0], config.spawn[1]);
    let inside = |p: Vec2| (0.0..=length).contains(&p.x) && (0.0..=width).contains(&p.y);
    if !inside(spawn_point) {
        return Err(Error::FloorPlan(
            "spawn point lies outside the corridor".into(),
        ));
    }
    if zones.iter().any(|z| z.contains(spawn_point)) {
        return Err(Error::FloorPlan(
            "spawn point lies inside a content zone".into(),
        ));
    }
    let last_edge = zones[ZONE_COUNT - 1].center.x + half_side;
    if !(config.exit_x > last_edge && config.exit_x < length) {
        return Err(Error::FloorPlan(format!(
            "exit_x {} must lie between the last zone edge {:.3} and the corridor end {:.3}",
            config.exit_x, last_edge, length
        )));
    }

    Ok(FloorPlan {
        length,
        width,
        zones,
        spawn_point,
        exit_x: config.exit_x,
        wall_margin: config.wall_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> FloorPlan {
        build_floorplan(&EnvConfig::default()).unwrap()
    }

    #[test]
    fn default_geometry() {
        let plan = plan();
        assert!((plan.area() - 208.54).abs() < 0.01);
        assert!((plan.length - 35.955).abs() < 1e-3);
        let xs: Vec<f64> = plan.zones.iter().map(|z| z.center.x).collect();
        assert_eq!(xs, vec![9.0, 17.0, 25.0]);
        for pair in plan.zones.windows(2) {
            assert_eq!(pair[1].center.x - pair[0].center.x, 8.0);
            assert_eq!(pair[0].center.y, pair[1].center.y);
        }
        for z in &plan.zones {
            assert!(((2.0 * z.half_side).powi(2) - 2.8).abs() < 1e-6);
            assert_eq!(z.performance_duration, 17.0);
            assert_eq!(z.center.y, 2.9);
        }
        assert_eq!(plan.spawn_point, Vec2::new(2.0, 2.9));
        assert_eq!(plan.exit_x, 33.0);
    }

    #[test]
    fn zones_that_do_not_fit_are_rejected() {
        let cfg = EnvConfig {
            zone_spacing: 40.0,
            ..EnvConfig::default()
        };
        assert!(matches!(build_floorplan(&cfg), Err(Error::FloorPlan(_))));
    }

    #[test]
    fn overlapping_zones_are_rejected() {
        let cfg = EnvConfig {
            zone_spacing: 1.0,
            exit_x: 20.0,
            ..EnvConfig::default()
        };
        assert!(build_floorplan(&cfg).is_err());
    }

    #[test]
    fn zone_touching_side_wall_is_rejected() {
        let cfg = EnvConfig {
            zone_y: 0.5,
            spawn: [2.0, 0.5],
            ..EnvConfig::default()
        };
        assert!(build_floorplan(&cfg).is_err());
    }

    #[test]
    fn spawn_inside_zone_is_rejected() {
        let cfg = EnvConfig {
            spawn: [9.2, 2.9],
            ..EnvConfig::default()
        };
        assert!(build_floorplan(&cfg).is_err());
    }

    #[test]
    fn containment() {
        let plan = plan();
        let z = &plan.zones[0];
        assert!(zone_contains(z, Vec2::new(9.0, 2.9)));
        // half side is sqrt(2.8)/2 = 0.83666 < 0.9
        assert!(!zone_contains(z, Vec2::new(9.9, 2.9)));
        let edge = Vec2::new(z.center.x + z.half_side - 1e-12, 2.9);
        assert!(zone_contains(z, edge));
        assert!(zone_contains(z, Vec2::new(9.8366, 2.9)));
    }

    #[test]
    fn walls() {
        let plan = plan();
        assert!(wall_contact(&plan, Vec2::new(18.0, 0.2)));
        assert!(!wall_contact(&plan, Vec2::new(18.0, 2.9)));
        assert!(wall_contact(&plan, Vec2::new(0.25, 2.9)));
        assert!(wall_contact(&plan, Vec2::new(plan.length - 0.1, 2.9)));
    }
}
