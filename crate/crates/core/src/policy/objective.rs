use ndarray::{ArrayView1, ArrayView2};

use super::network::{backward, forward_batch, HeadGradients};
use super::params::PolicyParams;
use crate::error::{Error, Result};

/// Head outputs for a batch, as seen by an [`Objective`].
#[derive(Debug, Clone, Copy)]
pub struct HeadOutputs<'a> {
    pub mean: ArrayView2<'a, f64>,
    pub logits: ArrayView2<'a, f64>,
    pub value: ArrayView1<'a, f64>,
    pub log_std: &'a [f64],
}

/// A scalar training loss over a fixed batch of observations.
///
/// Implementors only see head outputs; the trunk backward pass is shared.
pub trait Objective {
    fn observations(&self) -> ArrayView2<'_, f64>;

    /// Loss value and its gradient with respect to every head output.
    fn head_loss(&self, out: &HeadOutputs<'_>) -> (f64, HeadGradients);
}

fn outputs<'a>(params: &'a PolicyParams, pass: &'a super::ForwardPass) -> HeadOutputs<'a> {
    HeadOutputs {
        mean: pass.mean.view(),
        logits: pass.logits.view(),
        value: pass.value.view(),
        log_std: params.log_std(),
    }
}

pub fn loss(params: &PolicyParams, objective: &dyn Objective) -> Result<f64> {
    let pass = forward_batch(params, objective.observations())?;
    let (value, _) = objective.head_loss(&outputs(params, &pass));
    Ok(value)
}

/// Exact gradients of the objective with respect to every parameter.
pub fn loss_and_gradients(
    params: &PolicyParams,
    objective: &dyn Objective,
) -> Result<(f64, Vec<f64>)> {
    let pass = forward_batch(params, objective.observations())?;
    let (value, head_grads) = objective.head_loss(&outputs(params, &pass));
    if !value.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let grads = backward(params, &pass, &head_grads);
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of parameter {i}")));
    }
    Ok((value, grads))
}
