//! Mean-semivariance (MSV) policy optimization for ergodic tabular MDPs.
//!
//! The long-run criterion `xi_- = eta - beta * zeta_-` trades the average
//! reward `eta` against the steady-state downside semivariance `zeta_-`.
//! Because the semivariance depends on the policy's own mean, the reward is
//! policy-dependent and Bellman-style policy iteration does not apply. This
//! crate optimizes it through the surrogate reward
//! `g = (1 + 2 beta eta_-) r - beta (r - eta)_-^2`, whose advantage gives the
//! exact performance derivative.
//!
//! Modules:
//! - [`mdp`], [`chain`]: model, softmax policies, exact chain analysis;
//! - [`msv`]: risk statistics, surrogate rewards, exact difference and
//!   derivative formulas;
//! - [`solvers`]: trust-region policy iteration (MSVTRPI), mean-variance
//!   policy iteration (MVPI) and exact policy-gradient ascent;
//! - [`sampling`]: rollouts, running estimators, GAE, and the sample-based
//!   actor-critic (MSVAC) and clipped-surrogate (MSVPO) updates;
//! - [`envs`]: the two-path toy MDP, the risky bandit, the portfolio MDP
//!   and random instances;
//! - [`io`]: MDP/policy files and CSV records;
//! - [`verify`]: seeded oracle checks on random instances.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod envs;
pub mod error;
pub mod io;
pub mod mdp;
pub mod msv;
pub mod sampling;
pub mod solvers;
pub mod table;
pub mod verify;

pub use chain::{
    differential_values, fundamental_matrix, mean_first_passage_times, stationary_distribution, ChainAnalysis,
    DifferentialValues, Fundamental,
};
pub use error::{MsvError, Result};
pub use mdp::{induced_chain, kl_divergence, tv_distance, TabularMdp, TabularPolicy};
pub use msv::{RiskParams, RiskStats};
pub use table::SaTable;

pub use faer;
