use std::ops::Range;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::OBS_DIM;
use crate::error::{Error, Result};
use crate::seeding;

pub const CONTINUOUS_DIM: usize = 2;
pub const IDLE_STATES: usize = 4;
pub const LOG_STD_RANGE: (f64, f64) = (-5.0, 2.0);
const HIDDEN_WIDTH: usize = 128;
const HIDDEN_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetLayout {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub continuous_dim: usize,
    pub discrete_cardinality: usize,
}

impl Default for NetLayout {
    fn default() -> Self {
        Self {
            input_dim: OBS_DIM,
            hidden: vec![HIDDEN_WIDTH; HIDDEN_LAYERS],
            continuous_dim: CONTINUOUS_DIM,
            discrete_cardinality: IDLE_STATES,
        }
    }
}

impl NetLayout {
    /// The trunk is fixed at three tanh layers of 128 units.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim != OBS_DIM {
            return Err(Error::Layout(format!(
                "input_dim must be {OBS_DIM}, got {}",
                self.input_dim
            )));
        }
        if self.hidden != [HIDDEN_WIDTH; HIDDEN_LAYERS] {
            return Err(Error::Layout(format!(
                "hidden must be three layers of {HIDDEN_WIDTH}, got {:?}",
                self.hidden
            )));
        }
        if self.continuous_dim != CONTINUOUS_DIM || self.discrete_cardinality != IDLE_STATES {
            return Err(Error::Layout(format!(
                "heads must be {CONTINUOUS_DIM} continuous and {IDLE_STATES} discrete outputs"
            )));
        }
        Ok(())
    }

    pub fn index(&self) -> ParamIndex {
        ParamIndex::new(self)
    }
}

/// Network section of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub continuous_dim: usize,
    pub discrete_cardinality: usize,
    /// Initial value of both log-std entries.
    pub init_log_std: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        let layout = NetLayout::default();
        Self {
            input_dim: layout.input_dim,
            hidden: layout.hidden,
            continuous_dim: layout.continuous_dim,
            discrete_cardinality: layout.discrete_cardinality,
            init_log_std: -2.0,
        }
    }
}

impl NetConfig {
    pub fn layout(&self) -> NetLayout {
        NetLayout {
            input_dim: self.input_dim,
            hidden: self.hidden.clone(),
            continuous_dim: self.continuous_dim,
            discrete_cardinality: self.discrete_cardinality,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout()
            .validate()
            .map_err(|e| Error::Config(format!("net: {e}")))?;
        let (lo, hi) = LOG_STD_RANGE;
        if !(lo..=hi).contains(&self.init_log_std) {
            return Err(Error::Config(format!(
                "net.init_log_std must be in [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// Where each tensor lives in the flat parameter vector.
///
/// Order: for each trunk layer its weights (`in x out`, row-major) then
/// biases; mean head weights (`H x 2`) and biases; log-std (2); idle logits
/// head weights (`H x 4`) and biases; value head weights (`H x 1`) and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamIndex {
    pub trunk: Vec<DenseIndex>,
    pub mean: DenseIndex,
    pub log_std: Range<usize>,
    pub logits: DenseIndex,
    pub value: DenseIndex,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Range<usize>,
    pub bias: Range<usize>,
}

struct Cursor(usize);

impl Cursor {
    fn take(&mut self, n: usize) -> Range<usize> {
        let r = self.0..self.0 + n;
        self.0 = r.end;
        r
    }

    fn dense(&mut self, inputs: usize, outputs: usize) -> DenseIndex {
        DenseIndex {
            inputs,
            outputs,
            weights: self.take(inputs * outputs),
            bias: self.take(outputs),
        }
    }
}

impl ParamIndex {
    fn new(layout: &NetLayout) -> Self {
        let mut cursor = Cursor(0);
        let mut trunk = Vec::new();
        let mut width = layout.input_dim;
        for &h in &layout.hidden {
            trunk.push(cursor.dense(width, h));
            width = h;
        }
        let mean = cursor.dense(width, layout.continuous_dim);
        let log_std = cursor.take(layout.continuous_dim);
        let logits = cursor.dense(width, layout.discrete_cardinality);
        let value = cursor.dense(width, 1);
        Self {
            trunk,
            mean,
            log_std,
            logits,
            value,
            total: cursor.0,
        }
    }

    pub fn trunk_len(&self) -> usize {
        self.trunk.last().map_or(0, |l| l.bias.end)
    }
}

/// Network weights as one flat vector.
///
/// Every value produced by [`PolicyParams::init`] or by the optimizer is
/// exactly representable as an `f32`, which is what checkpoints store.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    layout: NetLayout,
    index: ParamIndex,
    values: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(layout: &NetLayout) -> Result<Self> {
        layout.validate()?;
        let index = layout.index();
        Ok(Self {
            layout: layout.clone(),
            values: vec![0.0; index.total],
            index,
        })
    }

    /// Orthogonal init: gain sqrt(2) on the trunk, 0.01 on the policy heads,
    /// 1.0 on the value head, zero biases.
    pub fn init(seed: u64, layout: &NetLayout, init_log_std: f64) -> Result<Self> {
        let mut p = Self::zeros(layout)?;
        let mut rng = seeding::rng_for(seed, 0x1417);
        let index = p.index.clone();
        for layer in &index.trunk {
            let w = orthogonal(
                layer.inputs,
                layer.outputs,
                std::f64::consts::SQRT_2,
                &mut rng,
            );
            p.values[layer.weights.clone()].copy_from_slice(&w);
        }
        for (head, gain) in [
            (&index.mean, 0.01),
            (&index.logits, 0.01),
            (&index.value, 1.0),
        ] {
            let w = orthogonal(head.inputs, head.outputs, gain, &mut rng);
            p.values[head.weights.clone()].copy_from_slice(&w);
        }
        p.values[index.log_std.clone()].fill(init_log_std);
        p.quantize();
        Ok(p)
    }

    /// Wrap raw values without rounding them to `f32` precision.
    pub fn from_raw(layout: &NetLayout, values: Vec<f64>) -> Result<Self> {
        layout.validate()?;
        let index = layout.index();
        if values.len() != index.total {
            return Err(Error::Layout(format!(
                "expected {} parameters, got {}",
                index.total,
                values.len()
            )));
        }
        Ok(Self {
            layout: layout.clone(),
            index,
            values,
        })
    }

    pub fn layout(&self) -> &NetLayout {
        &self.layout
    }

    pub fn index(&self) -> &ParamIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn log_std(&self) -> &[f64] {
        &self.values[self.index.log_std.clone()]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Round to `f32` precision and clamp the log-std into range.
    pub fn quantize(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
        let (lo, hi) = LOG_STD_RANGE;
        for v in &mut self.values[self.index.log_std.clone()] {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Row-major `rows x cols` matrix with orthonormal rows or columns.
fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (tall, narrow) = if rows >= cols {
        (rows, cols)
    } else {
        (cols, rows)
    };
    let a = DMatrix::<f64>::from_fn(tall, narrow, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let (ti, tj) = if rows >= cols { (i, j) } else { (j, i) };
            let sign = if r[(tj, tj)] < 0.0 { -1.0 } else { 1.0 };
            out[i * cols + j] = gain * sign * q[(ti, tj)];
        }
    }
    out
}
