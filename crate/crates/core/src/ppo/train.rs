use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::gae::normalize;
use super::objective::{clip_grad_norm, PpoObjective, PpoTerms};
use super::rollout::{collect_rollouts, VecEnv};
use crate::env::{build_floorplan, EnvConfig};
use crate::error::{Error, Result};
use crate::imitation::{
    bc_train, labeled_transitions, BcBatch, BcConfig, BcReport, DemoDataset, TransitionSet,
};
use crate::policy::{
    loss_and_gradients, save_checkpoint, AdamState, CheckpointMeta, NetConfig, PolicyParams,
};
use crate::reward::RewardConfig;
use crate::seeding::{self, derive_seed};

/// Everything a training run reads.
#[derive(Debug, Clone, Copy)]
pub struct TrainSetup<'a> {
    pub env: &'a EnvConfig,
    pub reward: &'a RewardConfig,
    pub net: &'a NetConfig,
    pub bc: &'a BcConfig,
    pub ppo: &'a TrainConfig,
    /// Demonstrations for cloning; without them PPO starts from the initial weights.
    pub demos: Option<&'a DemoDataset>,
    /// Where periodic and diagnostic checkpoints go.
    pub checkpoint_dir: Option<&'a Path>,
    pub model_id: Option<u32>,
}

/// One learning-curve line per PPO iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: u64,
    pub env_steps: u64,
    /// Mean cumulative reward of episodes that ended this iteration; NaN if none did.
    pub mean_reward: f64,
    pub completion_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    /// Weights after cloning, before any PPO update.
    pub pretrained: PolicyParams,
    pub bc_report: Option<BcReport>,
    pub curve: Vec<CurveRow>,
    pub env_steps: u64,
}

/// Clone the demonstrations, then fine-tune with PPO.
pub fn train(setup: &TrainSetup<'_>) -> Result<TrainOutcome> {
    setup.net.validate()?;
    setup.bc.validate()?;
    setup.ppo.validate()?;
    let seed = setup.ppo.seed;
    let init = PolicyParams::init(
        derive_seed(seed, 0),
        &setup.net.layout(),
        setup.net.init_log_std,
    )?;

    let (pretrained, bc_report, transitions) = match setup.demos {
        Some(demos) if setup.bc.epochs > 0 || setup.ppo.bc_regularizer > 0.0 => {
            let (p, report) = bc_train(&init, demos, setup.env, setup.bc, derive_seed(seed, 1))?;
            let transitions = if setup.ppo.bc_regularizer > 0.0 {
                Some(all_transitions(demos, setup.env)?)
            } else {
                None
            };
            (p, Some(report), transitions)
        }
        _ => (init, None, None),
    };
    let (params, curve) = ppo_train(&pretrained, setup, transitions.as_ref())?;
    let env_steps = curve.last().map_or(0, |r| r.env_steps);
    Ok(TrainOutcome {
        params,
        pretrained,
        bc_report,
        curve,
        env_steps,
    })
}

fn all_transitions(demos: &DemoDataset, env: &EnvConfig) -> Result<TransitionSet> {
    let plan = build_floorplan(env)?;
    let mut all = Vec::new();
    for traj in &demos.episodes {
        all.extend(labeled_transitions(traj, &plan, env)?);
    }
    Ok(TransitionSet::new(&all))
}

/// PPO from `params` until `total_steps` environment steps are consumed.
///
/// `regularizer` supplies demonstration transitions for the optional
/// cloning term, whose weight decays linearly with the learning rate.
pub fn ppo_train(
    params: &PolicyParams,
    setup: &TrainSetup<'_>,
    regularizer: Option<&TransitionSet>,
) -> Result<(PolicyParams, Vec<CurveRow>)> {
    let cfg = setup.ppo;
    cfg.validate()?;
    let mut params = params.clone();
    let iterations = cfg.iterations();
    if iterations == 0 {
        return Ok((params, Vec::new()));
    }
    let seed = cfg.seed;
    let mut venv = VecEnv::new(setup.env, setup.reward, cfg.n_envs, derive_seed(seed, 2))?;
    let mut rng = seeding::rng_for(seed, 3);
    let mut adam = AdamState::new(params.len());
    let batch_size = cfg.batch_size();
    let mut rows: Vec<usize> = (0..batch_size).collect();
    let mut curve = Vec::with_capacity(iterations as usize);

    for it in 0..iterations {
        let progress = if cfg.lr_decay {
            it as f64 / iterations as f64
        } else {
            0.0
        };
        let lr = cfg.learning_rate * (1.0 - progress);
        let bc_weight = cfg.bc_regularizer * (1.0 - progress);

        let mut batch = collect_rollouts(&params, &mut venv, cfg.horizon)
            .or_else(|e| abort(e, &params, setup, it * batch_size as u64))?;
        batch.compute_advantages(cfg.gamma, cfg.lambda, cfg.reward_scale);
        if let Some(i) = batch.advantages.iter().position(|a| !a.is_finite()) {
            return abort(
                Error::NonFinite(format!("advantage {i}")),
                &params,
                setup,
                it * batch_size as u64,
            );
        }
        normalize(&mut batch.advantages);

        let mut sums = PpoTerms::default();
        let mut updates = 0usize;
        for _ in 0..cfg.epochs {
            rows.shuffle(&mut rng);
            for chunk in rows.chunks(cfg.minibatch_size) {
                let mb = batch.minibatch(chunk);
                let bc_set = match regularizer {
                    Some(set) if bc_weight > 0.0 && !set.is_empty() => {
                        let picks: Vec<usize> = (0..cfg.minibatch_size)
                            .map(|_| rng.random_range(0..set.len()))
                            .collect();
                        Some(set.gather(&picks))
                    }
                    _ => None,
                };
                let mut objective =
                    PpoObjective::new(&mb, cfg.clip_epsilon, cfg.value_coef, cfg.entropy_coef);
                if let Some(set) = &bc_set {
                    objective = objective.with_bc(
                        BcBatch::new(set, setup.env, setup.bc.entropy_beta),
                        bc_weight,
                    );
                }
                let (_, mut grads) = loss_and_gradients(&params, &objective)
                    .or_else(|e| abort(e, &params, setup, it * batch_size as u64))?;
                if it < cfg.value_warmup_iterations as u64 {
                    keep_value_head(&params, &mut grads);
                }
                clip_grad_norm(&mut grads, cfg.max_grad_norm);
                adam.step(&mut params, &grads, lr);
                let t = objective.terms();
                sums.policy_loss += t.policy_loss;
                sums.value_loss += t.value_loss;
                sums.entropy += t.entropy;
                updates += 1;
            }
        }

        let env_steps = (it + 1) * batch_size as u64;
        let finished = batch.episodes.len();
        let (mean_reward, completion_rate) = if finished == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let n = finished as f64;
            (
                batch.episodes.iter().map(|e| e.reward).sum::<f64>() / n,
                batch.episodes.iter().filter(|e| e.completed).count() as f64 / n,
            )
        };
        let k = updates as f64;
        let row = CurveRow {
            iteration: it + 1,
            env_steps,
            mean_reward,
            completion_rate,
            policy_loss: sums.policy_loss / k,
            value_loss: sums.value_loss / k,
            entropy: sums.entropy / k,
        };
        log::info!(
            "iteration {}/{}: steps {} reward {:.2} completion {:.3} policy {:.4} value {:.4} entropy {:.3}",
            row.iteration,
            iterations,
            env_steps,
            row.mean_reward,
            row.completion_rate,
            row.policy_loss,
            row.value_loss,
            row.entropy
        );
        curve.push(row);

        if let Some(dir) = setup.checkpoint_dir {
            if cfg.checkpoint_interval > 0 && (it + 1) % cfg.checkpoint_interval as u64 == 0 {
                let path = periodic_path(dir, setup.model_id, env_steps);
                save_checkpoint(&path, &params, &meta(&params, setup, env_steps))?;
            }
        }
    }
    Ok((params, curve))
}

/// Zeroes every gradient entry outside the value head.
fn keep_value_head(params: &PolicyParams, grads: &mut [f64]) {
    let head = &params.index().value;
    for (i, g) in grads.iter_mut().enumerate() {
        if !head.weights.contains(&i) && !head.bias.contains(&i) {
            *g = 0.0;
        }
    }
}

fn meta(params: &PolicyParams, setup: &TrainSetup<'_>, step: u64) -> CheckpointMeta {
    let mut m = CheckpointMeta::new(params, setup.ppo.seed, step);
    m.model_id = setup.model_id;
    m
}

fn periodic_path(dir: &Path, model_id: Option<u32>, step: u64) -> PathBuf {
    match model_id {
        Some(id) => dir
            .join(format!("candidate-{id:02}"))
            .join(format!("step-{step:09}.ckpt")),
        None => dir.join(format!("step-{step:09}.ckpt")),
    }
}

/// Save the last good weights next to the other checkpoints, then fail.
fn abort<T>(err: Error, params: &PolicyParams, setup: &TrainSetup<'_>, step: u64) -> Result<T> {
    if let (Error::NonFinite(_), Some(dir)) = (&err, setup.checkpoint_dir) {
        let name = match setup.model_id {
            Some(id) => format!("diagnostic-{id:02}.ckpt"),
            None => "diagnostic.ckpt".to_string(),
        };
        let path = dir.join(name);
        save_checkpoint(&path, params, &meta(params, setup, step))?;
        log::error!(
            "training diverged at step {step}; last good weights saved to {}",
            path.display()
        );
    }
    Err(err)
}

pub fn write_curve_csv(path: &Path, curve: &[CurveRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    if curve.is_empty() {
        w.write_record([
            "iteration",
            "env_steps",
            "mean_reward",
            "completion_rate",
            "policy_loss",
            "value_loss",
            "entropy",
        ])?;
    }
    for row in curve {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
