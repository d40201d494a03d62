use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use super::params::{DenseIndex, PolicyParams};
use crate::error::{Error, Result};

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub input: Array2<f64>,
    /// Post-tanh output of each trunk layer.
    pub hidden: Vec<Array2<f64>>,
    pub mean: Array2<f64>,
    pub logits: Array2<f64>,
    pub value: Array1<f64>,
}

impl ForwardPass {
    pub fn batch_len(&self) -> usize {
        self.input.nrows()
    }

    fn features(&self) -> ArrayView2<'_, f64> {
        self.hidden.last().map_or(self.input.view(), |h| h.view())
    }
}

/// Derivative of a scalar loss with respect to every head output.
#[derive(Debug, Clone)]
pub struct HeadGradients {
    pub mean: Array2<f64>,
    pub logits: Array2<f64>,
    pub value: Array1<f64>,
    pub log_std: Vec<f64>,
}

impl HeadGradients {
    pub fn zeros(batch: usize, continuous: usize, discrete: usize) -> Self {
        Self {
            mean: Array2::zeros((batch, continuous)),
            logits: Array2::zeros((batch, discrete)),
            value: Array1::zeros(batch),
            log_std: vec![0.0; continuous],
        }
    }
}

fn weights<'a>(values: &'a [f64], d: &DenseIndex) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((d.inputs, d.outputs), &values[d.weights.clone()]).expect("weight shape")
}

fn bias<'a>(values: &'a [f64], d: &DenseIndex) -> ArrayView1<'a, f64> {
    ArrayView1::from(&values[d.bias.clone()])
}

fn affine(x: ArrayView2<'_, f64>, values: &[f64], d: &DenseIndex) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), d.outputs));
    out += &bias(values, d);
    general_mat_mul(1.0, &x, &weights(values, d), 1.0, &mut out);
    out
}

fn check_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Run a batch of observations (one per row) through the network.
pub fn forward_batch(params: &PolicyParams, obs: ArrayView2<'_, f64>) -> Result<ForwardPass> {
    let idx = params.index();
    if obs.ncols() != params.layout().input_dim {
        return Err(Error::Invalid(format!(
            "observation has {} entries, network expects {}",
            obs.ncols(),
            params.layout().input_dim
        )));
    }
    let input = obs.to_owned();
    check_finite(&input, "observation")?;
    let values = params.values();

    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(idx.trunk.len());
    for (l, layer) in idx.trunk.iter().enumerate() {
        let x = hidden.last().map_or(input.view(), |h| h.view());
        let mut h = affine(x, values, layer);
        h.mapv_inplace(f64::tanh);
        check_finite(&h, &format!("trunk layer {l}"))?;
        hidden.push(h);
    }
    let features = hidden.last().map_or(input.view(), |h| h.view());
    let mean = affine(features, values, &idx.mean);
    check_finite(&mean, "mean head")?;
    let logits = affine(features, values, &idx.logits);
    check_finite(&logits, "idle-state head")?;
    let value = affine(features, values, &idx.value).index_axis_move(Axis(1), 0);
    if !value.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("value head".into()));
    }
    Ok(ForwardPass {
        input,
        hidden,
        mean,
        logits,
        value,
    })
}

fn accumulate_dense(
    grads: &mut [f64],
    d: &DenseIndex,
    x: ArrayView2<'_, f64>,
    dy: ArrayView2<'_, f64>,
) {
    let mut gw = ArrayViewMut2::from_shape((d.inputs, d.outputs), &mut grads[d.weights.clone()])
        .expect("weight shape");
    general_mat_mul(1.0, &x.t(), &dy, 1.0, &mut gw);
    let mut gb = ArrayViewMut1::from(&mut grads[d.bias.clone()]);
    gb += &dy.sum_axis(Axis(0));
}

/// Reverse-mode pass: parameter gradients from head-output gradients.
pub fn backward(params: &PolicyParams, pass: &ForwardPass, g: &HeadGradients) -> Vec<f64> {
    let idx = params.index();
    let values = params.values();
    let mut grads = vec![0.0; idx.total];
    let features = pass.features();
    let value_grad = g.value.view().insert_axis(Axis(1));

    accumulate_dense(&mut grads, &idx.mean, features, g.mean.view());
    accumulate_dense(&mut grads, &idx.logits, features, g.logits.view());
    accumulate_dense(&mut grads, &idx.value, features, value_grad);
    for (slot, v) in grads[idx.log_std.clone()].iter_mut().zip(&g.log_std) {
        *slot += v;
    }

    let mut d_features = g.mean.dot(&weights(values, &idx.mean).t());
    general_mat_mul(
        1.0,
        &g.logits,
        &weights(values, &idx.logits).t(),
        1.0,
        &mut d_features,
    );
    general_mat_mul(
        1.0,
        &value_grad,
        &weights(values, &idx.value).t(),
        1.0,
        &mut d_features,
    );

    let mut d_out = d_features;
    for l in (0..idx.trunk.len()).rev() {
        let layer = &idx.trunk[l];
        let h = &pass.hidden[l];
        // tanh' = 1 - h^2
        let mut dz = d_out;
        dz.zip_mut_with(h, |d, &hv| *d *= 1.0 - hv * hv);
        let x = if l == 0 {
            pass.input.view()
        } else {
            pass.hidden[l - 1].view()
        };
        accumulate_dense(&mut grads, layer, x, dz.view());
        if l > 0 {
            d_out = dz.dot(&weights(values, layer).t());
        } else {
            break;
        }
    }
    grads
}
