//! Policy and value network.
//!
//! A shared tanh trunk of three 128-wide layers feeds three heads: a
//! Gaussian over (speed, turn rate) with a state-independent log-std, a
//! categorical over the four idle states, and a scalar value estimate.
//! Gradients are computed by hand-written reverse-mode differentiation over
//! whole batches.

mod adam;
mod checkpoint;
mod distribution;
mod network;
mod objective;
mod params;

pub use adam::{optimizer_step, AdamConfig, AdamState};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta,
    CHECKPOINT_MAGIC,
};
pub(crate) use distribution::distribution_row;
pub use distribution::{
    categorical_entropy, forward, gaussian_entropy, gaussian_log_density, log_prob_and_entropy,
    log_softmax, sample, ActionDistribution, PolicySample,
};
pub use network::{backward, forward_batch, ForwardPass, HeadGradients};
pub use objective::{loss, loss_and_gradients, HeadOutputs, Objective};
pub use params::{
    NetConfig, NetLayout, ParamIndex, PolicyParams, CONTINUOUS_DIM, IDLE_STATES, LOG_STD_RANGE,
};
