use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::gae::compute_gae;
use super::objective::PpoMinibatch;
use crate::env::{EnvConfig, Observation, TwinEnv, OBS_DIM};
use crate::error::{Error, Result};
use crate::policy::{distribution_row, forward_batch, sample, PolicyParams, CONTINUOUS_DIM};
use crate::reward::{RewardConfig, RewardLedger};
use crate::seeding;

/// Summary of an episode that ended during collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub env_index: usize,
    pub reward: f64,
    pub completed: bool,
    pub steps: u64,
}

/// Independent environments stepped in lockstep under one parameter snapshot.
///
/// Each environment owns its random stream, so results do not depend on how
/// work is scheduled. Episodes continue across collection calls and reset
/// automatically when they end.
pub struct VecEnv {
    envs: Vec<TwinEnv>,
    rngs: Vec<ChaCha8Rng>,
    obs: Vec<Observation>,
    ledgers: Vec<RewardLedger>,
    reward: RewardConfig,
}

impl VecEnv {
    pub fn new(env: &EnvConfig, reward: &RewardConfig, n_envs: usize, seed: u64) -> Result<Self> {
        if n_envs == 0 {
            return Err(Error::Invalid(
                "at least one environment is required".into(),
            ));
        }
        reward.validate()?;
        let template = TwinEnv::new(env.clone())?;
        let mut envs = Vec::with_capacity(n_envs);
        let mut rngs = Vec::with_capacity(n_envs);
        let mut obs = Vec::with_capacity(n_envs);
        let mut ledgers = Vec::with_capacity(n_envs);
        for i in 0..n_envs {
            let mut e = template.clone();
            let mut rng = seeding::rng_for(seed, i as u64);
            obs.push(e.reset(rng.random()));
            ledgers.push(RewardLedger::new(e.episode_id()));
            envs.push(e);
            rngs.push(rng);
        }
        Ok(Self {
            envs,
            rngs,
            obs,
            ledgers,
            reward: reward.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[TwinEnv] {
        &self.envs
    }

    fn observation_matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), OBS_DIM), |(i, j)| self.obs[i].0[j])
    }
}

/// Transitions from every environment, concatenated in environment order:
/// row `e * horizon + t` is step `t` of environment `e`.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub horizon: usize,
    pub observations: Array2<f64>,
    pub raw_actions: Vec<[f64; CONTINUOUS_DIM]>,
    pub idle: Vec<u8>,
    pub log_probs: Vec<f64>,
    /// Unscaled environment reward.
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub env_index: Vec<usize>,
    pub step_index: Vec<usize>,
    /// Value of each environment's observation after its last step.
    pub bootstrap_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub episodes: Vec<EpisodeStat>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Fill `advantages` and `returns` from rewards multiplied by `reward_scale`.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64, reward_scale: f64) {
        let h = self.horizon;
        self.advantages = Vec::with_capacity(self.len());
        self.returns = Vec::with_capacity(self.len());
        for e in 0..self.n_envs {
            let seg = e * h..(e + 1) * h;
            let rewards: Vec<f64> = self.rewards[seg.clone()]
                .iter()
                .map(|r| r * reward_scale)
                .collect();
            let (adv, ret) = compute_gae(
                &rewards,
                &self.values[seg.clone()],
                &self.dones[seg],
                self.bootstrap_values[e],
                gamma,
                lambda,
            );
            self.advantages.extend(adv);
            self.returns.extend(ret);
        }
    }

    pub fn minibatch(&self, rows: &[usize]) -> PpoMinibatch {
        PpoMinibatch {
            observations: self.observations.select(ndarray::Axis(0), rows),
            raw_actions: rows.iter().map(|&r| self.raw_actions[r]).collect(),
            idle: rows.iter().map(|&r| self.idle[r]).collect(),
            old_log_prob: rows.iter().map(|&r| self.log_probs[r]).collect(),
            advantages: rows.iter().map(|&r| self.advantages[r]).collect(),
            returns: rows.iter().map(|&r| self.returns[r]).collect(),
        }
    }
}

/// Advance every environment `horizon` steps with sampled actions.
pub fn collect_rollouts(
    params: &PolicyParams,
    venv: &mut VecEnv,
    horizon: usize,
) -> Result<RolloutBatch> {
    let n = venv.len();
    let total = n * horizon;
    let mut b = RolloutBatch {
        n_envs: n,
        horizon,
        observations: Array2::zeros((total, OBS_DIM)),
        raw_actions: vec![[0.0; CONTINUOUS_DIM]; total],
        idle: vec![0; total],
        log_probs: vec![0.0; total],
        rewards: vec![0.0; total],
        values: vec![0.0; total],
        dones: vec![false; total],
        env_index: (0..total).map(|r| r / horizon.max(1)).collect(),
        step_index: (0..total).map(|r| r % horizon.max(1)).collect(),
        bootstrap_values: vec![0.0; n],
        advantages: Vec::new(),
        returns: Vec::new(),
        episodes: Vec::new(),
    };
    for t in 0..horizon {
        let obs = venv.observation_matrix();
        let pass = forward_batch(params, obs.view())?;
        for e in 0..n {
            let row = e * horizon + t;
            let dist = distribution_row(params, &pass, e);
            let (s, lp) = sample(&dist, &mut venv.rngs[e]);
            let env = &mut venv.envs[e];
            let out = env.step(s.to_action(env.limits()))?;
            let r = venv.ledgers[e].apply(&out.events, &venv.reward)?;

            b.observations.row_mut(row).assign(&obs.row(e));
            b.raw_actions[row] = s.raw;
            b.idle[row] = s.idle_state;
            b.log_probs[row] = lp;
            b.rewards[row] = r;
            b.values[row] = dist.value;
            b.dones[row] = out.done;

            if out.done {
                let ledger = &venv.ledgers[e];
                b.episodes.push(EpisodeStat {
                    env_index: e,
                    reward: ledger.cumulative_reward,
                    completed: ledger.all_zones_entered(),
                    steps: env.steps(),
                });
                let seed = venv.rngs[e].random();
                venv.obs[e] = env.reset(seed);
                venv.ledgers[e] = RewardLedger::new(env.episode_id());
            } else {
                venv.obs[e] = out.observation;
            }
        }
    }
    let last = forward_batch(params, venv.observation_matrix().view())?;
    b.bootstrap_values = last.value.to_vec();
    Ok(b)
}
