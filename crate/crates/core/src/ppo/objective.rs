use std::borrow::Cow;
use std::cell::Cell;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use crate::error::Result;
use crate::imitation::BcBatch;
use crate::policy::{
    categorical_entropy, gaussian_entropy, gaussian_log_density, log_softmax, loss, HeadGradients,
    HeadOutputs, Objective, PolicyParams, CONTINUOUS_DIM, IDLE_STATES,
};

/// Transitions for one PPO update.
#[derive(Debug, Clone, Default)]
pub struct PpoMinibatch {
    pub observations: Array2<f64>,
    /// Unclamped (speed, turn rate) draws.
    pub raw_actions: Vec<[f64; CONTINUOUS_DIM]>,
    pub idle: Vec<u8>,
    /// Log-probability under the policy that collected the data.
    pub old_log_prob: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl PpoMinibatch {
    pub fn len(&self) -> usize {
        self.idle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idle.is_empty()
    }
}

/// Per-term breakdown of the last evaluated loss, averaged over samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoTerms {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub bc_loss: f64,
    /// Share of samples whose ratio sits outside the clip range on the binding side.
    pub clip_fraction: f64,
}

/// Mean of `-min(rA, clip(r)A) + c_v (V - R)^2 - c_e H`, plus an optional
/// weighted cloning loss evaluated on a separate demonstration batch.
pub struct PpoObjective<'a> {
    batch: &'a PpoMinibatch,
    clip_epsilon: f64,
    value_coef: f64,
    entropy_coef: f64,
    bc: Option<(BcBatch<'a>, f64)>,
    observations: Cow<'a, Array2<f64>>,
    terms: Cell<PpoTerms>,
}

impl<'a> PpoObjective<'a> {
    pub fn new(
        batch: &'a PpoMinibatch,
        clip_epsilon: f64,
        value_coef: f64,
        entropy_coef: f64,
    ) -> Self {
        Self {
            batch,
            clip_epsilon,
            value_coef,
            entropy_coef,
            bc: None,
            observations: Cow::Borrowed(&batch.observations),
            terms: Cell::new(PpoTerms::default()),
        }
    }

    /// Add `weight` times the cloning loss of `bc`.
    pub fn with_bc(mut self, bc: BcBatch<'a>, weight: f64) -> Self {
        if weight > 0.0 && !bc.set.is_empty() {
            let stacked = concatenate(
                Axis(0),
                &[self.batch.observations.view(), bc.set.observations.view()],
            )
            .expect("observation widths match");
            self.observations = Cow::Owned(stacked);
            self.bc = Some((bc, weight));
        }
        self
    }

    pub fn terms(&self) -> PpoTerms {
        self.terms.get()
    }
}

impl Objective for PpoObjective<'_> {
    fn observations(&self) -> ArrayView2<'_, f64> {
        self.observations.view()
    }

    fn head_loss(&self, out: &HeadOutputs<'_>) -> (f64, HeadGradients) {
        let b = self.batch;
        let n = b.len();
        let rows = out.mean.nrows();
        let inv_n = 1.0 / n as f64;
        let eps = self.clip_epsilon;
        let log_std = out.log_std;
        let h_gauss: f64 = log_std.iter().map(|&ls| gaussian_entropy(ls)).sum();

        let mut g = HeadGradients::zeros(rows, CONTINUOUS_DIM, IDLE_STATES);
        let mut t = PpoTerms::default();
        let mut clipped = 0usize;
        for i in 0..n {
            let logits: Vec<f64> = out.logits.row(i).to_vec();
            let lp_idle = log_softmax(&logits);
            let k = b.idle[i] as usize;
            let mut lp = lp_idle[k];
            for d in 0..CONTINUOUS_DIM {
                lp += gaussian_log_density(b.raw_actions[i][d], out.mean[[i, d]], log_std[d]);
            }
            let ratio = (lp - b.old_log_prob[i]).exp();
            let a = b.advantages[i];
            let unclipped = ratio * a;
            let clipped_obj = ratio.clamp(1.0 - eps, 1.0 + eps) * a;
            // d(-min)/d lp: the clipped branch is flat in the parameters
            let d_lp = if unclipped <= clipped_obj {
                -a * ratio
            } else {
                clipped += 1;
                0.0
            };
            t.policy_loss -= unclipped.min(clipped_obj);

            let h_cat = categorical_entropy(&lp_idle);
            t.entropy += h_gauss + h_cat;

            let v_err = out.value[i] - b.returns[i];
            t.value_loss += v_err * v_err;
            g.value[i] = 2.0 * self.value_coef * v_err * inv_n;

            for d in 0..CONTINUOUS_DIM {
                let inv_var = (-2.0 * log_std[d]).exp();
                let diff = b.raw_actions[i][d] - out.mean[[i, d]];
                g.mean[[i, d]] = d_lp * diff * inv_var * inv_n;
                g.log_std[d] += d_lp * (diff * diff * inv_var - 1.0) * inv_n;
            }
            for j in 0..IDLE_STATES {
                let p = lp_idle[j].exp();
                let onehot = if j == k { 1.0 } else { 0.0 };
                let d_ent = -p * (lp_idle[j] + h_cat);
                g.logits[[i, j]] = (d_lp * (onehot - p) - self.entropy_coef * d_ent) * inv_n;
            }
        }
        for gl in g.log_std.iter_mut() {
            *gl -= self.entropy_coef;
        }
        t.policy_loss *= inv_n;
        t.value_loss *= inv_n;
        t.entropy *= inv_n;
        t.clip_fraction = clipped as f64 * inv_n;
        let mut total =
            t.policy_loss + self.value_coef * t.value_loss - self.entropy_coef * t.entropy;

        if let Some((bc, weight)) = &self.bc {
            let tail = HeadOutputs {
                mean: out.mean.slice(s![n.., ..]),
                logits: out.logits.slice(s![n.., ..]),
                value: out.value.slice(s![n..]),
                log_std,
            };
            let (l, gb) = bc.head_loss(&tail);
            t.bc_loss = l;
            total += weight * l;
            g.mean.slice_mut(s![n.., ..]).scaled_add(*weight, &gb.mean);
            g.logits
                .slice_mut(s![n.., ..])
                .scaled_add(*weight, &gb.logits);
            g.value.slice_mut(s![n..]).scaled_add(*weight, &gb.value);
            for (a, b) in g.log_std.iter_mut().zip(&gb.log_std) {
                *a += weight * b;
            }
        }
        self.terms.set(t);
        (total, g)
    }
}

pub fn ppo_loss(params: &PolicyParams, objective: &PpoObjective<'_>) -> Result<f64> {
    loss(params, objective)
}

/// Scale `grads` in place so their L2 norm is at most `max_norm`; returns the norm before scaling.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let k = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{forward, NetLayout};
    use ndarray::Array1;

    fn batch_at(params: &PolicyParams, advantages: Vec<f64>, lp_shift: f64) -> PpoMinibatch {
        let n = advantages.len();
        let obs = Array2::from_shape_fn((n, 16), |(i, j)| ((i * 16 + j) as f64 * 0.37).sin() * 0.5);
        let mut old = Vec::new();
        let mut raw = Vec::new();
        for i in 0..n {
            let d = forward(params, obs.row(i).as_slice().unwrap()).unwrap();
            let r = [d.mean[0] + 0.1, d.mean[1] - 0.2];
            let s = crate::policy::PolicySample {
                raw: r,
                idle_state: (i % 4) as u8,
            };
            old.push(d.log_prob(&s) + lp_shift);
            raw.push(r);
        }
        PpoMinibatch {
            observations: obs,
            raw_actions: raw,
            idle: (0..n).map(|i| (i % 4) as u8).collect(),
            old_log_prob: old,
            returns: vec![0.0; n],
            advantages,
        }
    }

    fn outputs_for(n: usize) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        (
            Array2::zeros((n, 2)),
            Array2::zeros((n, 4)),
            Array1::zeros(n),
        )
    }

    #[test]
    fn clipping_arithmetic() {
        // ratio 1.5 with A = +1 uses the clipped 1.2; ratio 0.5 keeps 0.5
        let (mean, logits, value) = outputs_for(1);
        let log_std = [0.0, 0.0];
        let out = HeadOutputs {
            mean: mean.view(),
            logits: logits.view(),
            value: value.view(),
            log_std: &log_std,
        };
        let lp_at_zero = 2.0 * gaussian_log_density(0.0, 0.0, 0.0) + (0.25f64).ln();
        for (ratio, expected) in [(1.5f64, -1.2), (0.5, -0.5)] {
            let b = PpoMinibatch {
                observations: Array2::zeros((1, 16)),
                raw_actions: vec![[0.0, 0.0]],
                idle: vec![0],
                old_log_prob: vec![lp_at_zero - ratio.ln()],
                advantages: vec![1.0],
                returns: vec![0.0],
            };
            let obj = PpoObjective::new(&b, 0.2, 0.0, 0.0);
            obj.head_loss(&out);
            assert!((obj.terms().policy_loss - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_policy_has_zero_policy_term() {
        let params = PolicyParams::init(5, &NetLayout::default(), -1.0).unwrap();
        let mut adv = vec![0.3, -1.2, 2.0, 0.1, -0.7, 0.9];
        crate::ppo::normalize(&mut adv);
        let b = batch_at(&params, adv, 0.0);
        let obj = PpoObjective::new(&b, 0.2, 0.0, 0.0);
        ppo_loss(&params, &obj).unwrap();
        assert!(obj.terms().policy_loss.abs() < 1e-12);
        assert_eq!(obj.terms().clip_fraction, 0.0);
    }

    #[test]
    fn grad_norm_clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut g = vec![0.3, 0.4];
        clip_grad_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }
}
