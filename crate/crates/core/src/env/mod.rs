//! Digital twin of the corridor: geometry, agent kinematics, zone triggers,
//! wall contact and observations.

mod config;
mod floorplan;
mod observation;
mod twin;

pub use config::EnvConfig;
pub use floorplan::{
    build_floorplan, wall_contact, zone_contains, ContentZone, FloorPlan, ZONE_COUNT,
};
pub use observation::{observation_at, Observation, OBS_DIM};
pub use twin::{Action, AgentState, MotionLimits, StepEvents, StepOutcome, TwinEnv};
