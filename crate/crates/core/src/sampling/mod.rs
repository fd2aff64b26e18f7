//! Model-free path: rollouts, running risk estimators, differential GAE, and
//! the actor-critic (MSVAC) and clipped-surrogate (MSVPO) updates on tabular
//! softmax policies.

mod agent;
mod estimators;
mod optim;
mod rollout;

pub use agent::{
    clipped_objective, evaluate_by_simulation, msvac_update, msvpo_update, policy_gradient_estimate,
    score_function_gradient, train, Agent, Algorithm, SamplingConfig, TrainOutput, TrainRecord,
};
pub use estimators::{
    gae_advantages, step_rewards, update_running_stats, value_loss_and_update, GaeSign, RewardKind, RunningStats,
    ValueTable,
};
pub use optim::{Adam, Optimizer, PolicyOptimizer};
pub use rollout::{empirical_stats, simulate, BanditEnv, Batch, Environment, Rollout, Transition};
