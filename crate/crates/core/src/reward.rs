//! Zone-visit rewards.
//!
//! Per step the agent earns an entry payment on each first entry into a
//! zone (escalating 48.2, 63.7, 85.5 by entry order), a 41.0 bonus when the
//! third zone is entered, dwell reward for time inside a zone up to the
//! performance length, a small shaping reward while closing in on the
//! nearest unvisited zone, and a penalty while touching a wall.
//!
//! [`replay_rewards`] recomputes the same totals from raw positions alone
//! and serves as an audit of the online [`RewardLedger`].

use serde::{Deserialize, Serialize};

use crate::env::{FloorPlan, StepEvents, ZONE_COUNT};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// How the escalating entry payments are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryIndexing {
    /// The k-th zone entered pays `entry_rewards[k]`, whichever zone it is.
    #[default]
    Order,
    /// Zone `i` always pays `entry_rewards[i]`.
    Zone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub entry_rewards: [f64; ZONE_COUNT],
    pub completion_bonus: f64,
    /// Per second while the distance to the target zone shrinks.
    pub proximity_rate: f64,
    /// Per second while touching a wall (applied with a negative sign).
    pub wall_penalty_rate: f64,
    /// Per second of credited dwell.
    pub dwell_rate: f64,
    /// Seconds of dwell that pay per zone.
    pub dwell_cap: f64,
    pub entry_indexing: EntryIndexing,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            entry_rewards: [48.2, 63.7, 85.5],
            completion_bonus: 41.0,
            proximity_rate: 0.03,
            wall_penalty_rate: 0.01,
            dwell_rate: 1.0,
            dwell_cap: 17.0,
            entry_indexing: EntryIndexing::Order,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.entry_rewards.iter().enumerate() {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::Config(format!(
                    "reward.entry_rewards[{i}] must be non-negative"
                )));
            }
        }
        let fields = [
            ("completion_bonus", self.completion_bonus),
            ("proximity_rate", self.proximity_rate),
            ("wall_penalty_rate", self.wall_penalty_rate),
            ("dwell_rate", self.dwell_rate),
            ("dwell_cap", self.dwell_cap),
        ];
        for (key, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("reward.{key} must be non-negative")));
            }
        }
        Ok(())
    }

    fn entry_payment(&self, entries_made: usize, zone: usize) -> f64 {
        match self.entry_indexing {
            EntryIndexing::Order => self.entry_rewards[entries_made.min(ZONE_COUNT - 1)],
            EntryIndexing::Zone => self.entry_rewards[zone],
        }
    }
}

/// Maximum episodic reward excluding shaping and penalty.
pub fn fixed_component_max(cfg: &RewardConfig) -> f64 {
    cfg.entry_rewards.iter().sum::<f64>()
        + cfg.completion_bonus
        + ZONE_COUNT as f64 * cfg.dwell_rate * cfg.dwell_cap
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub entry: f64,
    pub completion: f64,
    pub dwell: f64,
    pub shaping: f64,
    /// Always <= 0.
    pub penalty: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.entry + self.completion + self.dwell + self.shaping + self.penalty
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.entry,
            self.completion,
            self.dwell,
            self.shaping,
            self.penalty,
        ]
    }

    pub fn max_abs_diff(&self, other: &RewardComponents) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn accumulate(&mut self, other: &RewardComponents) {
        self.entry += other.entry;
        self.completion += other.completion;
        self.dwell += other.dwell;
        self.shaping += other.shaping;
        self.penalty += other.penalty;
    }

    pub(crate) fn scaled(&self, k: f64) -> RewardComponents {
        RewardComponents {
            entry: self.entry * k,
            completion: self.completion * k,
            dwell: self.dwell * k,
            shaping: self.shaping * k,
            penalty: self.penalty * k,
        }
    }
}

/// Per-episode reward accrual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLedger {
    pub episode: u64,
    pub entries_made: usize,
    pub dwell_credited: [f64; ZONE_COUNT],
    pub cumulative_reward: f64,
    pub components: RewardComponents,
}

impl RewardLedger {
    pub fn new(episode: u64) -> Self {
        Self {
            episode,
            entries_made: 0,
            dwell_credited: [0.0; ZONE_COUNT],
            cumulative_reward: 0.0,
            components: RewardComponents::default(),
        }
    }

    pub fn all_zones_entered(&self) -> bool {
        self.entries_made >= ZONE_COUNT
    }

    /// Book one step's events and return the step reward.
    pub fn apply(&mut self, events: &StepEvents, cfg: &RewardConfig) -> Result<f64> {
        if events.episode != self.episode {
            return Err(Error::EpisodeMismatch {
                ledger: self.episode,
                events: events.episode,
            });
        }
        let mut step = RewardComponents::default();
        if let Some(zone) = events.entered_zone_first_time {
            step.entry = cfg.entry_payment(self.entries_made, zone);
            self.entries_made += 1;
        }
        if events.all_zones_just_completed {
            step.completion = cfg.completion_bonus;
        }
        if let Some(zone) = events.inside_zone {
            let credit = events
                .dwell_credit
                .min(cfg.dwell_cap - self.dwell_credited[zone])
                .max(0.0);
            self.dwell_credited[zone] += credit;
            step.dwell = cfg.dwell_rate * credit;
        }
        if events.moved_closer_to_target {
            step.shaping = cfg.proximity_rate * events.dt;
        }
        if events.wall_contact {
            step.penalty = -cfg.wall_penalty_rate * events.dt;
        }
        let reward = step.total();
        self.components.accumulate(&step);
        self.cumulative_reward += reward;
        Ok(reward)
    }
}

/// Pure form of [`RewardLedger::apply`].
pub fn step_reward(
    events: &StepEvents,
    ledger: &RewardLedger,
    cfg: &RewardConfig,
) -> Result<(f64, RewardLedger)> {
    let mut next = ledger.clone();
    let r = next.apply(events, cfg)?;
    Ok((r, next))
}

/// Recompute reward totals from the positions of a track.
///
/// Works from geometry alone: zone membership, distances to zone centers and
/// to walls at each sample. The first sample is the reset pose; every later
/// sample is the pose after one step.
pub fn replay_rewards(
    traj: &Trajectory,
    plan: &FloorPlan,
    cfg: &RewardConfig,
) -> Result<RewardComponents> {
    let Some(dt) = traj.uniform_dt()? else {
        return Ok(RewardComponents::default());
    };
    let mut totals = RewardComponents::default();
    let mut entered = [false; ZONE_COUNT];
    let mut n_entered = 0usize;
    let mut zone_time = [0.0f64; ZONE_COUNT];

    for pair in traj.samples.windows(2) {
        let (before, after) = (pair[0].position, pair[1].position);

        // shaping target: closest not-yet-entered zone center, seen from `before`
        let mut target: Option<(usize, f64)> = None;
        for (i, z) in plan.zones.iter().enumerate() {
            if entered[i] {
                continue;
            }
            let d = before.distance(z.center);
            if target.is_none_or(|(_, best)| d < best) {
                target = Some((i, d));
            }
        }
        if let Some((i, d_before)) = target {
            if after.distance(plan.zones[i].center) < d_before {
                totals.shaping += cfg.proximity_rate * dt;
            }
        }

        for (i, z) in plan.zones.iter().enumerate() {
            let inside = (after.x - z.center.x).abs() <= z.half_side
                && (after.y - z.center.y).abs() <= z.half_side;
            if !inside {
                continue;
            }
            if !entered[i] {
                entered[i] = true;
                totals.entry += match cfg.entry_indexing {
                    EntryIndexing::Order => cfg.entry_rewards[n_entered],
                    EntryIndexing::Zone => cfg.entry_rewards[i],
                };
                n_entered += 1;
                if n_entered == ZONE_COUNT {
                    totals.completion += cfg.completion_bonus;
                }
            }
            let cap = z.performance_duration.min(cfg.dwell_cap);
            let credit = dt.min(cap - zone_time[i]).max(0.0);
            zone_time[i] += credit;
            totals.dwell += cfg.dwell_rate * credit;
        }

        let near_wall = [
            after.x,
            plan.length - after.x,
            after.y,
            plan.width - after.y,
        ]
        .into_iter()
        .any(|d| d < plan.wall_margin);
        if near_wall {
            totals.penalty -= cfg.wall_penalty_rate * dt;
        }
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn events(ep: u64) -> StepEvents {
        StepEvents {
            episode: ep,
            entered_zone_first_time: None,
            inside_zone: None,
            dwell_credit: 0.0,
            moved_closer_to_target: false,
            wall_contact: false,
            all_zones_just_completed: false,
            dt: 0.1,
        }
    }

    #[test]
    fn first_entry_pays_first_reward() {
        let cfg = RewardConfig::default();
        let ev = StepEvents {
            entered_zone_first_time: Some(2),
            inside_zone: Some(2),
            dwell_credit: 0.0,
            ..events(0)
        };
        let (r, ledger) = step_reward(&ev, &RewardLedger::new(0), &cfg).unwrap();
        assert_eq!(r, 48.2);
        assert_eq!(ledger.entries_made, 1);
    }

    #[test]
    fn third_entry_with_completion() {
        let cfg = RewardConfig::default();
        let mut ledger = RewardLedger::new(0);
        ledger.entries_made = 2;
        let ev = StepEvents {
            entered_zone_first_time: Some(0),
            inside_zone: Some(0),
            all_zones_just_completed: true,
            ..events(0)
        };
        let (r, _) = step_reward(&ev, &ledger, &cfg).unwrap();
        assert!((r - 126.5).abs() < 1e-12);
    }

    #[test]
    fn shaping_and_penalty_rates() {
        let cfg = RewardConfig::default();
        let closer = StepEvents {
            moved_closer_to_target: true,
            ..events(0)
        };
        let (r, _) = step_reward(&closer, &RewardLedger::new(0), &cfg).unwrap();
        assert!((r - 0.003).abs() < 1e-15);
        let wall = StepEvents {
            wall_contact: true,
            ..events(0)
        };
        let (r, l) = step_reward(&wall, &RewardLedger::new(0), &cfg).unwrap();
        assert!((r + 0.001).abs() < 1e-15);
        assert!(l.components.penalty < 0.0);
    }

    #[test]
    fn zone_indexing_pays_by_identity() {
        let cfg = RewardConfig {
            entry_indexing: EntryIndexing::Zone,
            ..RewardConfig::default()
        };
        let ev = StepEvents {
            entered_zone_first_time: Some(2),
            inside_zone: Some(2),
            ..events(0)
        };
        let (r, _) = step_reward(&ev, &RewardLedger::new(0), &cfg).unwrap();
        assert_eq!(r, 85.5);
    }

    #[test]
    fn episode_mismatch_is_an_error() {
        let cfg = RewardConfig::default();
        let err = step_reward(&events(3), &RewardLedger::new(2), &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::EpisodeMismatch {
                ledger: 2,
                events: 3
            }
        ));
    }

    #[test]
    fn dwell_is_capped_by_ledger() {
        let cfg = RewardConfig::default();
        let mut ledger = RewardLedger::new(0);
        let ev = StepEvents {
            inside_zone: Some(1),
            dwell_credit: 0.1,
            ..events(0)
        };
        for _ in 0..400 {
            ledger.apply(&ev, &cfg).unwrap();
        }
        assert!(ledger.components.dwell <= cfg.dwell_rate * cfg.dwell_cap + 1e-12);
        assert!((ledger.dwell_credited[1] - 17.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_maximum() {
        let cfg = RewardConfig::default();
        // 48.2 + 63.7 + 85.5 + 41.0 = 238.4, plus 3 * 17 s of dwell at 1/s
        assert!((fixed_component_max(&cfg) - 289.4).abs() < 1e-9);
        let no_dwell = RewardConfig {
            dwell_rate: 0.0,
            ..cfg.clone()
        };
        assert!((fixed_component_max(&no_dwell) - 238.4).abs() < 1e-9);
        let dwell_only = RewardConfig {
            entry_rewards: [0.0; 3],
            completion_bonus: 0.0,
            ..cfg
        };
        assert!((fixed_component_max(&dwell_only) - 51.0).abs() < 1e-9);
    }
}
