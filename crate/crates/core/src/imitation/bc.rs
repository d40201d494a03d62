use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::demos::{labeled_transitions, DemoDataset, LabeledTransition};
use crate::env::{build_floorplan, EnvConfig, OBS_DIM};
use crate::error::{Error, Result};
use crate::policy::{
    categorical_entropy, forward_batch, log_softmax, loss, loss_and_gradients, AdamState,
    HeadGradients, HeadOutputs, Objective, PolicyParams, CONTINUOUS_DIM, IDLE_STATES,
};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the entropy bonus subtracted from the loss.
    pub entropy_beta: f64,
    /// Fraction of episodes held out for validation.
    pub holdout_fraction: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 256,
            learning_rate: 1e-3,
            entropy_beta: 0.0,
            holdout_fraction: 0.2,
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("bc.batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("bc.learning_rate must be positive".into()));
        }
        if !(self.entropy_beta.is_finite() && self.entropy_beta >= 0.0) {
            return Err(Error::Config("bc.entropy_beta must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config("bc.holdout_fraction must be in [0,1)".into()));
        }
        Ok(())
    }
}

/// Struct-of-arrays view of labeled transitions.
#[derive(Debug, Clone)]
pub struct TransitionSet {
    pub observations: Array2<f64>,
    /// (speed, turn rate) per row.
    pub actions: Array2<f64>,
    pub idle: Vec<u8>,
}

impl TransitionSet {
    pub fn new(transitions: &[LabeledTransition]) -> Self {
        let n = transitions.len();
        let mut observations = Array2::zeros((n, OBS_DIM));
        let mut actions = Array2::zeros((n, CONTINUOUS_DIM));
        let mut idle = Vec::with_capacity(n);
        for (i, t) in transitions.iter().enumerate() {
            for (j, v) in t.observation.0.iter().enumerate() {
                observations[[i, j]] = *v;
            }
            actions[[i, 0]] = t.action.speed;
            actions[[i, 1]] = t.action.turn_rate;
            idle.push(t.action.idle_state);
        }
        Self {
            observations,
            actions,
            idle,
        }
    }

    pub fn len(&self) -> usize {
        self.idle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idle.is_empty()
    }

    pub fn gather(&self, rows: &[usize]) -> TransitionSet {
        TransitionSet {
            observations: self.observations.select(ndarray::Axis(0), rows),
            actions: self.actions.select(ndarray::Axis(0), rows),
            idle: rows.iter().map(|&r| self.idle[r]).collect(),
        }
    }
}

/// Behavioral cloning loss over a batch of transitions.
///
/// Per sample: squared error of the Gaussian mean against the demonstrated
/// (speed, turn rate), each dimension divided by its half-range squared,
/// plus the cross-entropy of the idle head, minus `beta` times the policy
/// entropy. Averaged over the batch.
#[derive(Debug, Clone)]
pub struct BcBatch<'a> {
    pub set: &'a TransitionSet,
    pub half_range: [f64; CONTINUOUS_DIM],
    pub beta: f64,
}

impl<'a> BcBatch<'a> {
    pub fn new(set: &'a TransitionSet, env: &EnvConfig, beta: f64) -> Self {
        Self {
            set,
            half_range: [env.v_max / 2.0, env.omega_max],
            beta,
        }
    }
}

impl Objective for BcBatch<'_> {
    fn observations(&self) -> ArrayView2<'_, f64> {
        self.set.observations.view()
    }

    fn head_loss(&self, out: &HeadOutputs<'_>) -> (f64, HeadGradients) {
        let n = self.set.len();
        let inv_n = 1.0 / n as f64;
        let mut g = HeadGradients::zeros(n, CONTINUOUS_DIM, IDLE_STATES);
        let mut total = 0.0;
        for i in 0..n {
            for d in 0..CONTINUOUS_DIM {
                let s2 = self.half_range[d] * self.half_range[d];
                let err = out.mean[[i, d]] - self.set.actions[[i, d]];
                total += err * err / s2;
                g.mean[[i, d]] = 2.0 * err / s2 * inv_n;
            }
            let logits: Vec<f64> = out.logits.row(i).to_vec();
            let lp = log_softmax(&logits);
            let label = self.set.idle[i] as usize;
            total -= lp[label];
            let h_cat = categorical_entropy(&lp);
            for k in 0..IDLE_STATES {
                let p = lp[k].exp();
                let onehot = if k == label { 1.0 } else { 0.0 };
                let mut gk = p - onehot;
                if self.beta != 0.0 {
                    // d(-beta * H)/d logit_k = beta * p_k (log p_k + H)
                    gk += self.beta * p * (lp[k] + h_cat);
                }
                g.logits[[i, k]] = gk * inv_n;
            }
            if self.beta != 0.0 {
                total -= self.beta * h_cat;
            }
        }
        if self.beta != 0.0 {
            let h_gauss: f64 = out
                .log_std
                .iter()
                .map(|&ls| crate::policy::gaussian_entropy(ls))
                .sum();
            total -= self.beta * h_gauss * n as f64;
            g.log_std.iter_mut().for_each(|v| *v = -self.beta);
        }
        (total * inv_n, g)
    }
}

pub fn bc_loss(params: &PolicyParams, batch: &BcBatch<'_>) -> Result<f64> {
    if batch.set.is_empty() {
        return Err(Error::Invalid(
            "behavioral cloning needs a non-empty batch".into(),
        ));
    }
    loss(params, batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcMetrics {
    pub loss: f64,
    /// Mean over samples and both dimensions of the half-range-normalized squared error.
    pub continuous_mse: f64,
    pub idle_accuracy: f64,
}

pub fn bc_metrics(params: &PolicyParams, batch: &BcBatch<'_>) -> Result<BcMetrics> {
    let pass = forward_batch(params, batch.set.observations.view())?;
    let out = HeadOutputs {
        mean: pass.mean.view(),
        logits: pass.logits.view(),
        value: pass.value.view(),
        log_std: params.log_std(),
    };
    let (loss, _) = batch.head_loss(&out);
    let n = batch.set.len();
    let mut se = 0.0;
    let mut correct = 0usize;
    for i in 0..n {
        for d in 0..CONTINUOUS_DIM {
            let err = (pass.mean[[i, d]] - batch.set.actions[[i, d]]) / batch.half_range[d];
            se += err * err;
        }
        let row = pass.logits.row(i);
        let best = (0..IDLE_STATES)
            .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        correct += (best == batch.set.idle[i] as usize) as usize;
    }
    Ok(BcMetrics {
        loss,
        continuous_mse: se / (n * CONTINUOUS_DIM) as f64,
        idle_accuracy: correct as f64 / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcEpoch {
    pub epoch: usize,
    /// Mean minibatch loss during the epoch; full-set loss for epoch 0.
    pub train_loss: f64,
    pub heldout: BcMetrics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BcReport {
    pub train_transitions: usize,
    pub heldout_transitions: usize,
    /// Entry 0 is measured before any update.
    pub epochs: Vec<BcEpoch>,
}

/// Minibatch Adam on the cloning loss over a seeded episode-level split.
pub fn bc_train(
    params: &PolicyParams,
    demos: &DemoDataset,
    env: &EnvConfig,
    cfg: &BcConfig,
    seed: u64,
) -> Result<(PolicyParams, BcReport)> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::Invalid(
            "behavioral cloning needs demonstrations".into(),
        ));
    }
    let plan = build_floorplan(env)?;
    let mut order: Vec<usize> = (0..demos.len()).collect();
    order.shuffle(&mut seeding::rng_for(seed, 0xBC01));
    let n_heldout = if demos.len() > 1 {
        ((demos.len() as f64 * cfg.holdout_fraction).round() as usize).min(demos.len() - 1)
    } else {
        0
    };
    let (heldout_eps, train_eps) = order.split_at(n_heldout);

    let collect = |eps: &[usize]| -> Result<TransitionSet> {
        let mut all = Vec::new();
        for &e in eps {
            all.extend(labeled_transitions(&demos.episodes[e], &plan, env)?);
        }
        Ok(TransitionSet::new(&all))
    };
    let train_set = collect(train_eps)?;
    let heldout_set = if n_heldout > 0 {
        collect(heldout_eps)?
    } else {
        train_set.clone()
    };
    if train_set.is_empty() {
        return Err(Error::Invalid(
            "demonstrations contain no transitions".into(),
        ));
    }

    let mut params = params.clone();
    let mut adam = AdamState::new(params.len());
    let mut rng = seeding::rng_for(seed, 0xBC02);
    let heldout_batch = BcBatch::new(&heldout_set, env, cfg.entropy_beta);
    let mut report = BcReport {
        train_transitions: train_set.len(),
        heldout_transitions: heldout_set.len(),
        epochs: vec![BcEpoch {
            epoch: 0,
            train_loss: bc_loss(&params, &BcBatch::new(&train_set, env, cfg.entropy_beta))?,
            heldout: bc_metrics(&params, &heldout_batch)?,
        }],
    };

    let mut rows: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        rows.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in rows.chunks(cfg.batch_size) {
            let mb = train_set.gather(chunk);
            let (l, grads) =
                loss_and_gradients(&params, &BcBatch::new(&mb, env, cfg.entropy_beta))?;
            adam.step(&mut params, &grads, cfg.learning_rate);
            loss_sum += l;
            batches += 1;
        }
        let heldout = bc_metrics(&params, &heldout_batch)?;
        log::debug!(
            "bc epoch {epoch}: train {:.4} heldout {:.4} mse {:.4} idle acc {:.3}",
            loss_sum / batches as f64,
            heldout.loss,
            heldout.continuous_mse,
            heldout.idle_accuracy
        );
        report.epochs.push(BcEpoch {
            epoch,
            train_loss: loss_sum / batches as f64,
            heldout,
        });
    }
    Ok((params, report))
}
