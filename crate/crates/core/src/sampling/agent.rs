use serde::{Deserialize, Serialize};

use crate::error::{MsvError, Result};
use crate::mdp::TabularPolicy;
use crate::msv::RiskStats;
use crate::table::SaTable;

use super::estimators::{
    gae_advantages, step_rewards, update_running_stats, GaeSign, RewardKind, RunningStats, ValueTable,
};
use super::optim::{Optimizer, PolicyOptimizer};
use super::rollout::{empirical_stats, Batch, Environment, Rollout};

/// Hyperparameters of the sample-based learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub beta: f64,
    /// Mixing rate of the running moment estimates.
    pub alpha: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub optimizer: Optimizer,
    /// Global gradient-norm cap; `0` disables it.
    pub grad_clip: f64,
    pub gae_lambda: f64,
    pub gae_sign: GaeSign,
    pub clip_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Average value constraint coefficient.
    pub avc_nu: f64,
    pub reward_kind: RewardKind,
    pub start_state: usize,
    pub burn_in: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            alpha: 0.01,
            policy_lr: 0.01,
            value_lr: 1.0,
            optimizer: Optimizer::Adam,
            grad_clip: 0.0,
            gae_lambda: 0.95,
            gae_sign: GaeSign::Standard,
            clip_eps: 0.2,
            epochs: 10,
            batch_size: 256,
            avc_nu: 0.3,
            reward_kind: RewardKind::Surrogate,
            start_state: 0,
            burn_in: 1000,
        }
    }
}

impl SamplingConfig {
    /// Settings for the one-state bandit: no bootstrapping, short batches
    /// and a step size large enough to commit within a few thousand pulls.
    pub fn for_bandit(beta: f64, reward_kind: RewardKind) -> Self {
        Self {
            beta,
            reward_kind,
            policy_lr: 0.05,
            batch_size: 16,
            gae_lambda: 0.0,
            avc_nu: 0.0,
            burn_in: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(MsvError::InvalidParameter(what.into()));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and >= 0");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.policy_lr >= 0.0 && self.value_lr >= 0.0) {
            return bad("learning rates must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be > 0");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.avc_nu) {
            return bad("avc_nu must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Msvac,
    Msvpo,
}

/// Learner state: policy, critic, running moments, optimizer moments.
#[derive(Debug, Clone)]
pub struct Agent {
    pub policy: TabularPolicy,
    pub values: ValueTable,
    pub stats: RunningStats,
    optimizer: PolicyOptimizer,
}

impl Agent {
    pub fn new(n_states: usize, n_actions: usize, config: &SamplingConfig) -> Self {
        Self::with_policy(TabularPolicy::uniform(n_states, n_actions), config)
    }

    pub fn with_policy(policy: TabularPolicy, config: &SamplingConfig) -> Self {
        let (n_s, n_a) = (policy.n_states(), policy.n_actions());
        Self {
            policy,
            values: ValueTable::zeros(n_s, config.value_lr),
            stats: RunningStats::new(config.alpha),
            optimizer: PolicyOptimizer::new(config.optimizer, n_s * n_a, config.policy_lr, config.grad_clip),
        }
    }

    fn ascend(&mut self, grad: &SaTable) {
        let mut logits = self.policy.logits().clone();
        self.optimizer.ascend(logits.as_mut_slice(), grad.as_slice());
        self.policy = TabularPolicy::from_logits(logits);
    }
}

/// `(1/N) sum_n grad log mu(a_n|s_n) A_n` with respect to the logits.
pub fn score_function_gradient(policy: &TabularPolicy, batch: &Batch, advantages: &[f64]) -> SaTable {
    let mut grad = SaTable::zeros(policy.n_states(), policy.n_actions());
    let n = batch.len().max(1) as f64;
    for (t, &a_hat) in batch.transitions.iter().zip(advantages) {
        let probs = policy.probs().row(t.state);
        let row = grad.row_mut(t.state);
        for (b, (g, &p)) in row.iter_mut().zip(probs).enumerate() {
            let indicator = if b == t.action { 1.0 } else { 0.0 };
            *g += (indicator - p) * a_hat / n;
        }
    }
    grad
}

/// Advantage estimates and the score-function gradient for fixed `values`
/// and `stats`.
pub fn policy_gradient_estimate(
    policy: &TabularPolicy,
    values: &[f64],
    stats: &RunningStats,
    batch: &Batch,
    config: &SamplingConfig,
) -> (SaTable, Vec<f64>) {
    let advantages = batch_advantages(values, stats, batch, config);
    (score_function_gradient(policy, batch, &advantages), advantages)
}

fn batch_advantages(values: &[f64], stats: &RunningStats, batch: &Batch, config: &SamplingConfig) -> Vec<f64> {
    let kind = config.reward_kind;
    let rewards = step_rewards(batch, kind, stats, config.beta);
    let average = kind.average(stats, config.beta);
    gae_advantages(batch, values, &rewards, average, config.gae_lambda, config.gae_sign)
}

/// One actor-critic step; returns the value loss.
pub fn msvac_update(agent: &mut Agent, batch: &Batch, config: &SamplingConfig) -> f64 {
    agent.stats = update_running_stats(&agent.stats, batch);
    let (grad, advantages) = policy_gradient_estimate(&agent.policy, &agent.values.values, &agent.stats, batch, config);
    agent.ascend(&grad);
    let targets = agent.values.targets(batch, &advantages);
    let loss = agent.values.fit(batch, &targets);
    agent.values.recenter(batch, config.avc_nu);
    loss
}

/// Mean clipped and unclipped surrogate objectives of `policy` relative to
/// the behaviour policy `old`.
pub fn clipped_objective(
    policy: &TabularPolicy,
    old: &TabularPolicy,
    batch: &Batch,
    advantages: &[f64],
    clip_eps: f64,
) -> (f64, f64) {
    let n = batch.len().max(1) as f64;
    let (mut clipped, mut unclipped) = (0.0, 0.0);
    for (t, &a_hat) in batch.transitions.iter().zip(advantages) {
        let w = policy.prob(t.state, t.action) / old.prob(t.state, t.action);
        let wc = w.clamp(1.0 - clip_eps, 1.0 + clip_eps);
        clipped += (w * a_hat).min(wc * a_hat);
        unclipped += w * a_hat;
    }
    (clipped / n, unclipped / n)
}

fn clipped_gradient(
    policy: &TabularPolicy,
    old: &TabularPolicy,
    batch: &Batch,
    advantages: &[f64],
    clip_eps: f64,
) -> SaTable {
    let mut grad = SaTable::zeros(policy.n_states(), policy.n_actions());
    let n = batch.len().max(1) as f64;
    for (t, &a_hat) in batch.transitions.iter().zip(advantages) {
        let w = policy.prob(t.state, t.action) / old.prob(t.state, t.action);
        // the clipped branch is flat
        if (a_hat > 0.0 && w > 1.0 + clip_eps) || (a_hat < 0.0 && w < 1.0 - clip_eps) {
            continue;
        }
        let probs = policy.probs().row(t.state);
        let row = grad.row_mut(t.state);
        for (b, (g, &p)) in row.iter_mut().zip(probs).enumerate() {
            let indicator = if b == t.action { 1.0 } else { 0.0 };
            *g += w * (indicator - p) * a_hat / n;
        }
    }
    grad
}

/// `epochs` ascent steps on the clipped objective over the frozen batch,
/// then `epochs` critic steps towards frozen targets; returns the last
/// value loss.
pub fn msvpo_update(agent: &mut Agent, batch: &Batch, config: &SamplingConfig) -> f64 {
    agent.stats = update_running_stats(&agent.stats, batch);
    let advantages = batch_advantages(&agent.values.values, &agent.stats, batch, config);
    let old = agent.policy.clone();
    for _ in 0..config.epochs {
        let grad = clipped_gradient(&agent.policy, &old, batch, &advantages, config.clip_eps);
        agent.ascend(&grad);
    }
    let targets = agent.values.targets(batch, &advantages);
    let mut loss = 0.0;
    for _ in 0..config.epochs {
        loss = agent.values.fit(batch, &targets);
    }
    agent.values.recenter(batch, config.avc_nu);
    loss
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub steps: usize,
    pub eta_hat: f64,
    pub zeta_minus_hat: f64,
    pub xi_minus_hat: f64,
    pub value_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub agent: Agent,
    pub history: Vec<TrainRecord>,
}

/// Runs `total_steps` environment steps of one continuing rollout, updating
/// after every batch.
pub fn train<E: Environment + ?Sized>(
    env: &E,
    config: &SamplingConfig,
    algorithm: Algorithm,
    total_steps: usize,
    seed: u64,
) -> Result<TrainOutput> {
    config.validate()?;
    if config.start_state >= env.n_states() {
        return Err(MsvError::Range(format!(
            "start state {} outside 0..{}",
            config.start_state,
            env.n_states()
        )));
    }
    let mut agent = Agent::new(env.n_states(), env.n_actions(), config);
    let mut rollout = Rollout::new(seed, config.start_state);
    let mut history = Vec::with_capacity(total_steps / config.batch_size + 1);
    let mut steps = 0;
    while steps < total_steps {
        let n = config.batch_size.min(total_steps - steps);
        let batch = rollout.collect(env, &agent.policy, n);
        let value_loss = match algorithm {
            Algorithm::Msvac => msvac_update(&mut agent, &batch, config),
            Algorithm::Msvpo => msvpo_update(&mut agent, &batch, config),
        };
        steps += n;
        history.push(TrainRecord {
            steps,
            eta_hat: agent.stats.eta_hat,
            zeta_minus_hat: agent.stats.zeta_minus_hat,
            xi_minus_hat: agent.stats.xi_minus_hat(config.beta),
            value_loss,
        });
    }
    Ok(TrainOutput { agent, history })
}

/// Steady reward moments estimated from one long run after `burn_in` steps.
pub fn evaluate_by_simulation<E: Environment + ?Sized>(
    env: &E,
    policy: &TabularPolicy,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
    start_state: usize,
) -> Result<RiskStats> {
    let batch = super::rollout::simulate(env, policy, burn_in + n_steps, seed, start_state)?;
    let rewards: Vec<f64> = batch.rewards().skip(burn_in).collect();
    Ok(empirical_stats(&rewards))
}
