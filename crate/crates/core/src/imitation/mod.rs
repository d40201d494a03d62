//! Teacher demonstrations and behavioral cloning.

mod bc;
mod demos;
mod oracle;

pub use bc::{
    bc_loss, bc_metrics, bc_train, BcBatch, BcConfig, BcEpoch, BcMetrics, BcReport, TransitionSet,
};
pub use demos::{
    derive_actions, generate_oracle_demos, labeled_transitions, DemoDataset, DemoSource,
    LabeledTransition, HUMAN_TRACKING_SECONDS, HUMAN_TRIALS, HUMAN_TRIAL_SECONDS,
};
pub use oracle::{idle_sector, OracleConfig, OracleTeacher};
