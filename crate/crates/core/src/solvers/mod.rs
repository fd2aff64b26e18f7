//! Exact, model-based optimizers.
//!
//! All solvers iterate on the surrogate reward of the current policy and
//! record one [`TraceRecord`] per iteration.

mod dual;
mod mvpi;
mod pg;
mod trpi;

use serde::{Deserialize, Serialize};

use crate::error::{MsvError, Result};
use crate::mdp::TabularPolicy;
use crate::msv::RiskStats;

pub use dual::{dual_objective, solve_dual_temperature, tilted_kl, DualSolution};
pub use mvpi::mvpi;
pub use pg::msvpg_ascent;
pub use trpi::{msvtrpi, msvtrpi_step, trust_region_bound_report, BoundReport, StepDiagnostics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub beta: f64,
    /// KL radius of each trust-region step.
    pub eps_mu: f64,
    pub max_iters: usize,
    /// Stop once `|xi_-' - xi_-|` falls below this...
    pub convergence_tol: f64,
    /// ...and the stationary-weighted TV step below this...
    pub policy_tol: f64,
    /// ...and `max A_g` below this. Without it, states the policy almost
    /// never visits can stop short of greedy.
    pub residual_tol: f64,
    pub dual_bracket: (f64, f64),
    pub dual_tol: f64,
    /// Random initial logits (uniform in `[-1, 1]`) instead of the uniform
    /// policy.
    pub init_seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            eps_mu: 0.05,
            max_iters: 10_000,
            convergence_tol: 1e-8,
            policy_tol: 1e-6,
            residual_tol: 1e-6,
            dual_bracket: (1e-6, 1e6),
            dual_tol: 1e-10,
            init_seed: None,
        }
    }
}

impl SolverConfig {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.dual_bracket;
        let bad = |what: String| Err(MsvError::InvalidParameter(what));
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !(self.eps_mu > 0.0) {
            return bad(format!("eps_mu must be > 0, got {}", self.eps_mu));
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!("dual bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]"));
        }
        if !(self.convergence_tol > 0.0 && self.policy_tol > 0.0 && self.residual_tol > 0.0 && self.dual_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        Ok(())
    }

    pub(crate) fn initial_policy(&self, n_states: usize, n_actions: usize) -> TabularPolicy {
        match self.init_seed {
            Some(seed) => crate::envs::random_policy(n_states, n_actions, seed, 1.0),
            None => TabularPolicy::uniform(n_states, n_actions),
        }
    }
}

/// One solver iteration. Fields that do not apply to a solver are `NaN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Statistics of the policy entering the iteration.
    pub eta: f64,
    pub zeta: f64,
    pub zeta_minus: f64,
    pub xi_minus: f64,
    /// Trust-region radius used for the step.
    pub radius: f64,
    pub kl_step: f64,
    pub dual_temperature: f64,
    pub optimality_residual: f64,
    /// Right-hand side of the trust-region improvement bound for this step.
    pub lower_bound_rhs: f64,
    /// Whether the step was kept (rejected steps lowered `xi_-`).
    pub accepted: bool,
}

impl TraceRecord {
    fn from_stats(iter: usize, stats: &RiskStats, beta: f64) -> Self {
        Self {
            iter,
            eta: stats.eta,
            zeta: stats.zeta,
            zeta_minus: stats.zeta_minus,
            xi_minus: stats.xi_minus(beta),
            radius: f64::NAN,
            kl_step: f64::NAN,
            dual_temperature: f64::NAN,
            optimality_residual: f64::NAN,
            lower_bound_rhs: f64::NAN,
            accepted: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Why a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    /// Policy iteration revisited an earlier policy.
    Cycle,
    /// Every step, however small, lowered the criterion.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    /// Final policy; on non-convergence the best one seen.
    pub policy: TabularPolicy,
    pub stats: RiskStats,
    pub trace: IterationTrace,
    pub stop: StopReason,
    /// `max A_g` of the returned policy.
    pub optimality_residual: f64,
}

impl SolverOutput {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}
