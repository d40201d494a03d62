use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its domain; the message starts with the key path.
    #[error("{0}")]
    Config(String),

    #[error("invalid floor plan: {0}")]
    FloorPlan(String),

    #[error("cannot step an episode that is already done")]
    EpisodeDone,

    #[error("ledger belongs to episode {ledger} but events come from episode {events}")]
    EpisodeMismatch { ledger: u64, events: u64 },

    #[error(
        "non-uniform timestamps at sample {index}: expected spacing {expected}, found {found}"
    )]
    NonUniformTimestamps {
        index: usize,
        expected: f64,
        found: f64,
    },

    #[error("invalid trajectory: {0}")]
    Trajectory(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid network layout: {0}")]
    Layout(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("unknown controller `{0}`")]
    UnknownController(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
