use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::env::FloorPlan;
use crate::error::Result;
use crate::trajectory::Trajectory;

const PX_PER_M: f64 = 20.0;
const MARGIN: f64 = 10.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Overhead plot: corridor, zones, spawn point and one polyline per track.
pub fn render_svg(plan: &FloorPlan, trajectories: &[Trajectory]) -> String {
    let w = plan.length * PX_PER_M + 2.0 * MARGIN;
    let h = plan.width * PX_PER_M + 2.0 * MARGIN;
    // y grows upwards in the corridor and downwards in SVG
    let px = |x: f64| MARGIN + x * PX_PER_M;
    let py = |y: f64| MARGIN + (plan.width - y) * PX_PER_M;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#fafafa" stroke="#333"/>"##,
        px(0.0),
        py(plan.width),
        plan.length * PX_PER_M,
        plan.width * PX_PER_M
    );
    for z in &plan.zones {
        let side = 2.0 * z.half_side * PX_PER_M;
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{side:.1}" height="{side:.1}" fill="#ffe9a8" stroke="#c90"/>"##,
            px(z.center.x - z.half_side),
            py(z.center.y + z.half_side)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4 3"/>"##,
        py(plan.width),
        py(0.0),
        x = px(plan.exit_x)
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{:.1}" cy="{:.1}" r="4" fill="#333"/>"##,
        px(plan.spawn_point.x),
        py(plan.spawn_point.y)
    );
    for (i, t) in trajectories.iter().enumerate() {
        let points: Vec<String> = t
            .samples
            .iter()
            .map(|p| format!("{:.1},{:.1}", px(p.position.x), py(p.position.y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" stroke-opacity="0.8" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, plan: &FloorPlan, trajectories: &[Trajectory]) -> Result<()> {
    fs::write(path, render_svg(plan, trajectories))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_floorplan, EnvConfig};
    use crate::geometry::Vec2;
    use crate::trajectory::TrajectorySample;

    #[test]
    fn draws_every_track() {
        let plan = build_floorplan(&EnvConfig::default()).unwrap();
        let t = Trajectory {
            episode_id: 0,
            samples: vec![TrajectorySample {
                t: 0.0,
                position: Vec2::new(2.0, 2.9),
                heading: 0.0,
                idle_state: 0,
            }],
        };
        let svg = render_svg(&plan, &[t.clone(), t]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("#ffe9a8").count(), 3);
    }
}
