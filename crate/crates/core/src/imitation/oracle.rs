//! Scripted teacher that produces demonstration tracks.
//!
//! Walks to each zone in nearest-unvisited order along straight segments,
//! stops at a jittered point inside the zone and watches for the length of
//! the performance plus a little extra while slowly turning three quarters
//! of a circle, then turns in place toward the next target. After the last
//! zone it walks out through the exit. The idle animation follows the
//! heading quadrant, so it cycles through all four states while watching.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::controller::Controller;
use crate::env::{Action, Observation, TwinEnv};
use crate::error::Result;
use crate::geometry::{wrap_angle, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Max distance of a zone waypoint from the zone center (meters).
    pub waypoint_jitter: f64,
    /// Walking speed range, sampled per leg (m/s).
    pub speed_range: (f64, f64),
    /// Extra watching time on top of the performance (seconds).
    pub extra_dwell: (f64, f64),
    /// Total heading change while watching (radians).
    pub watch_sweep: f64,
    /// How far past the exit line the final waypoint sits (meters).
    pub exit_overshoot: f64,
    /// Heading error above which the teacher turns in place (radians).
    pub align_tolerance: f64,
    pub arrive_radius: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            waypoint_jitter: 0.5,
            speed_range: (0.8, 1.4),
            extra_dwell: (0.0, 3.0),
            watch_sweep: 1.5 * PI,
            exit_overshoot: 1.5,
            align_tolerance: 0.35,
            arrive_radius: 0.05,
        }
    }
}

/// Idle animation for a heading: 0 facing +x, 1 facing +y, 2 facing -x, 3 facing -y.
pub fn idle_sector(heading: f64) -> u8 {
    (((heading + FRAC_PI_4).rem_euclid(2.0 * PI) / FRAC_PI_2) as u8).min(3)
}

#[derive(Debug, Clone, PartialEq)]
enum Leg {
    Zone {
        waypoint: Vec2,
        speed: f64,
        watch_steps: u32,
        sweep_rate: f64,
    },
    Exit {
        waypoint: Vec2,
        speed: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Walking,
    Watching { remaining: u32 },
}

#[derive(Debug, Clone)]
pub struct OracleTeacher {
    config: OracleConfig,
    legs: Vec<Leg>,
    leg: usize,
    phase: Phase,
}

impl Default for OracleTeacher {
    fn default() -> Self {
        Self::new(OracleConfig::default())
    }
}

impl OracleTeacher {
    pub fn new(config: OracleConfig) -> Self {
        Self {
            config,
            legs: Vec::new(),
            leg: 0,
            phase: Phase::Walking,
        }
    }

    fn plan_legs(&mut self, env: &TwinEnv, rng: &mut ChaCha8Rng) {
        let cfg = &self.config;
        let plan = env.plan();
        let dt = env.config().dt;
        let margin = plan.wall_margin + 0.2;
        let inward = |p: Vec2| {
            Vec2::new(
                p.x.clamp(margin, plan.length - margin),
                p.y.clamp(margin, plan.width - margin),
            )
        };
        let mut legs = Vec::new();
        let mut at = env.state().position;
        let mut remaining: Vec<usize> = (0..plan.zones.len()).collect();
        while !remaining.is_empty() {
            let (pos, &zone) = remaining
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    at.distance(plan.zones[*a.1].center)
                        .total_cmp(&at.distance(plan.zones[*b.1].center))
                })
                .expect("non-empty");
            remaining.remove(pos);
            let z = &plan.zones[zone];
            let r = cfg.waypoint_jitter.min(z.half_side * 0.95) * rng.random::<f64>().sqrt();
            let waypoint = inward(z.center + Vec2::from_polar(r, rng.random_range(-PI..PI)));
            let speed = rng.random_range(cfg.speed_range.0..=cfg.speed_range.1);
            let watch =
                z.performance_duration + rng.random_range(cfg.extra_dwell.0..=cfg.extra_dwell.1);
            let watch_steps = (watch / dt).ceil() as u32;
            legs.push(Leg::Zone {
                waypoint,
                speed,
                watch_steps,
                sweep_rate: cfg.watch_sweep / (watch_steps as f64 * dt),
            });
            at = waypoint;
        }
        let exit = inward(Vec2::new(
            plan.exit_x + cfg.exit_overshoot,
            plan.width / 2.0 + rng.random_range(-0.5..=0.5),
        ));
        legs.push(Leg::Exit {
            waypoint: exit,
            speed: rng.random_range(cfg.speed_range.0..=cfg.speed_range.1),
        });
        self.legs = legs;
        self.leg = 0;
        self.phase = Phase::Walking;
    }

    fn steer(&self, env: &TwinEnv, waypoint: Vec2, speed: f64) -> Action {
        let dt = env.config().dt;
        let omega = env.limits().omega_max;
        let s = env.state();
        let to = waypoint - s.position;
        let err = wrap_angle(to.angle() - s.heading);
        let turn = (err / dt).clamp(-omega, omega);
        let residual = err - turn * dt;
        let speed = if residual.abs() > self.config.align_tolerance {
            0.0
        } else {
            speed.min(to.norm() / dt)
        };
        Action::new(speed, turn, idle_sector(s.heading + turn * dt))
    }
}

impl Controller for OracleTeacher {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn begin_episode(&mut self, env: &TwinEnv, rng: &mut ChaCha8Rng) {
        self.plan_legs(env, rng);
    }

    fn act(&mut self, env: &TwinEnv, _obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action> {
        if self.legs.is_empty() {
            self.plan_legs(env, rng);
        }
        let heading = env.state().heading;
        let dt = env.config().dt;
        loop {
            let Some(leg) = self.legs.get(self.leg).cloned() else {
                return Ok(Action::new(0.0, 0.0, idle_sector(heading)));
            };
            match (self.phase, leg) {
                (Phase::Watching { remaining }, Leg::Zone { sweep_rate, .. }) => {
                    if remaining == 0 {
                        self.phase = Phase::Walking;
                        self.leg += 1;
                        continue;
                    }
                    self.phase = Phase::Watching {
                        remaining: remaining - 1,
                    };
                    return Ok(Action::new(
                        0.0,
                        sweep_rate,
                        idle_sector(heading + sweep_rate * dt),
                    ));
                }
                (
                    Phase::Walking,
                    Leg::Zone {
                        waypoint,
                        speed,
                        watch_steps,
                        ..
                    },
                ) => {
                    if env.state().position.distance(waypoint) <= self.config.arrive_radius {
                        self.phase = Phase::Watching {
                            remaining: watch_steps,
                        };
                        continue;
                    }
                    return Ok(self.steer(env, waypoint, speed));
                }
                (_, Leg::Exit { waypoint, speed }) => {
                    return Ok(self.steer(env, waypoint, speed));
                }
            }
        }
    }
}
