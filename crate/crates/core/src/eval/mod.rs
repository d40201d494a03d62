//! Task metrics, motion labels, troupe simulation and plots.

mod motion;
mod report;
mod svg;
mod troupe;

pub use motion::{
    label_motion_states, motion_fractions, MotionFractions, MotionState, TURN_THRESHOLD,
    WALK_THRESHOLD,
};
pub use report::{evaluate_controller, evaluate_policy, run_episode, EpisodeRecord, EvalReport};
pub use svg::{render_svg, write_svg};
pub use troupe::{dispersion, npc_baseline, simulate_troupe, TroupeRun, NPC_OFFSET, SPAWN_STAGGER};
