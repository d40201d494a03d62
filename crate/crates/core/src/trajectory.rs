//! Time-stamped position tracks and their file formats.
//!
//! JSONL: one sample per line, `{"ep": int, "t": float, "x": float, "y": float,
//! "h": float, "idle": int}`. `h` and `idle` are optional on import; a missing
//! heading is rebuilt from the direction of travel and a missing idle state
//! reads as 0. Exports of simulated tracks additionally carry the speed of the
//! step that ended at the sample as `"v"`.
//!
//! CSV mirrors the same columns: `ep,t,x,y,h,v,idle`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec2,
    pub heading: f64,
    pub idle_state: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub episode_id: u64,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Sample spacing, checking that it is constant. Single-sample tracks
    /// have no spacing and yield `None`.
    pub fn uniform_dt(&self) -> Result<Option<f64>> {
        if self.samples.len() < 2 {
            return Ok(None);
        }
        let dt = self.samples[1].t - self.samples[0].t;
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::NonUniformTimestamps {
                index: 1,
                expected: f64::NAN,
                found: dt,
            });
        }
        self.check_dt(dt)?;
        Ok(Some(dt))
    }

    /// Check that sample `k` sits at `t0 + k * dt`.
    pub fn check_dt(&self, dt: f64) -> Result<()> {
        let Some(first) = self.samples.first() else {
            return Ok(());
        };
        for (k, s) in self.samples.iter().enumerate().skip(1) {
            let expected = first.t + k as f64 * dt;
            if (s.t - expected).abs() > 1e-6 * dt.max(1.0) {
                let found = s.t - self.samples[k - 1].t;
                return Err(Error::NonUniformTimestamps {
                    index: k,
                    expected: dt,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Speed of the step ending at each sample; 0 for the first sample.
    pub fn speeds(&self, dt: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.samples.len());
        v.extend(self.samples.first().map(|_| 0.0));
        v.extend(
            self.samples
                .windows(2)
                .map(|w| w[1].position.distance(w[0].position) / dt),
        );
        v
    }

    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[1].position.distance(w[0].position))
            .sum()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    ep: u64,
    t: f64,
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idle: Option<u8>,
}

#[derive(Debug, Serialize)]
struct CsvRecord {
    ep: u64,
    t: f64,
    x: f64,
    y: f64,
    h: f64,
    v: f64,
    idle: u8,
}

fn records(traj: &Trajectory, with_speed: bool) -> impl Iterator<Item = Record> + '_ {
    let dt = traj.uniform_dt().ok().flatten();
    let speeds = match (with_speed, dt) {
        (true, Some(dt)) => traj.speeds(dt),
        _ => vec![],
    };
    traj.samples.iter().enumerate().map(move |(k, s)| Record {
        ep: traj.episode_id,
        t: s.t,
        x: s.position.x,
        y: s.position.y,
        h: Some(s.heading),
        v: speeds.get(k).copied(),
        idle: Some(s.idle_state),
    })
}

/// Write tracks as JSONL. With `with_speed`, each line also carries `"v"`.
pub fn write_jsonl<W: Write>(
    mut out: W,
    trajectories: &[Trajectory],
    with_speed: bool,
) -> Result<()> {
    for traj in trajectories {
        for rec in records(traj, with_speed) {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(out: W, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for traj in trajectories {
        for rec in records(traj, true) {
            w.serialize(CsvRecord {
                ep: rec.ep,
                t: rec.t,
                x: rec.x,
                y: rec.y,
                h: rec.h.unwrap_or(0.0),
                v: rec.v.unwrap_or(0.0),
                idle: rec.idle.unwrap_or(0),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read JSONL tracks, grouping lines by `ep` in order of first appearance.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut order: Vec<u64> = Vec::new();
    let mut groups: BTreeMap<u64, Vec<Record>> = BTreeMap::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Trajectory(format!("line {}: {e}", lineno + 1)))?;
        if ![rec.t, rec.x, rec.y].iter().all(|v| v.is_finite()) {
            return Err(Error::Trajectory(format!(
                "line {}: non-finite field",
                lineno + 1
            )));
        }
        if let Some(idle) = rec.idle {
            if idle > 3 {
                return Err(Error::Trajectory(format!(
                    "line {}: idle state {idle} outside 0..=3",
                    lineno + 1
                )));
            }
        }
        groups
            .entry(rec.ep)
            .or_insert_with(|| {
                order.push(rec.ep);
                Vec::new()
            })
            .push(rec);
    }
    Ok(order
        .into_iter()
        .map(|ep| build_trajectory(ep, groups.remove(&ep).unwrap_or_default()))
        .collect())
}

fn build_trajectory(ep: u64, recs: Vec<Record>) -> Trajectory {
    let n = recs.len();
    let positions: Vec<Vec2> = recs.iter().map(|r| Vec2::new(r.x, r.y)).collect();
    let mut samples = Vec::with_capacity(n);
    let mut last_heading = 0.0;
    for (k, r) in recs.iter().enumerate() {
        let heading = match r.h {
            Some(h) => wrap_angle(h),
            None => {
                // direction of the step leaving this sample, else the one arriving
                let step = if k + 1 < n {
                    positions[k + 1] - positions[k]
                } else if k > 0 {
                    positions[k] - positions[k - 1]
                } else {
                    Vec2::default()
                };
                if step.norm() > 1e-9 {
                    step.angle()
                } else {
                    last_heading
                }
            }
        };
        last_heading = heading;
        samples.push(TrajectorySample {
            t: r.t,
            position: positions[k],
            heading,
            idle_state: r.idle.unwrap_or(0),
        });
    }
    Trajectory {
        episode_id: ep,
        samples,
    }
}
