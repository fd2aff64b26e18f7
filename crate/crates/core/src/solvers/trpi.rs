//! MSV trust-region policy iteration.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{kl_divergence, kl_per_state, tv_distance, TabularMdp, TabularPolicy};
use crate::msv::{expected_advantage, RiskStats, SurrogateEvaluation};
use crate::table::SaTable;

use super::{solve_dual_temperature, IterationTrace, SolverConfig, SolverOutput, StopReason, TraceRecord};

/// What one trust-region step did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Statistics of the policy before the step.
    pub stats: RiskStats,
    pub xi_minus: f64,
    pub dual_temperature: f64,
    /// The KL constraint was slack and the step is greedy.
    pub greedy: bool,
    /// Realized `E_pi KL(mu' || mu)`.
    pub kl: f64,
    /// Surrogate improvement `E_{pi, mu'}[A_g]`.
    pub surrogate_gain: f64,
    pub optimality_residual: f64,
}

/// Closed-form update `mu' ∝ mu exp(A_g / v*)` from an existing evaluation.
fn step_from(
    eval: &SurrogateEvaluation,
    policy: &TabularPolicy,
    config: &SolverConfig,
) -> Result<(TabularPolicy, StepDiagnostics)> {
    let pi = &eval.analysis.pi;
    let dual = solve_dual_temperature(&eval.adv_g, pi, policy, config.eps_mu, config)?;
    let v = dual.temperature;
    let logits = SaTable::from_fn(policy.n_states(), policy.n_actions(), |s, a| {
        policy.logits()[(s, a)] + eval.adv_g[(s, a)] / v
    });
    let next = TabularPolicy::from_logits(logits);
    let diag = StepDiagnostics {
        stats: eval.stats,
        xi_minus: eval.xi_minus(),
        dual_temperature: v,
        greedy: dual.at_lower_edge,
        kl: kl_divergence(&next, policy, pi)?,
        surrogate_gain: expected_advantage(pi, &next, &eval.adv_g),
        optimality_residual: eval.optimality_residual(),
    };
    Ok((next, diag))
}

pub fn msvtrpi_step(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    config: &SolverConfig,
) -> Result<(TabularPolicy, StepDiagnostics)> {
    config.validate()?;
    let eval = SurrogateEvaluation::new(mdp, policy, config.beta)?;
    step_from(&eval, policy, config)
}

/// Terms of the trust-region improvement bound
/// `xi_-' - xi_- >= L_g - 2 (k' - 1) eps_g eps_mu - 12 beta k'^2 R^2 eps_mu^2`
/// and of the state-action distribution bound `|rho' - rho|_1 <= 2 k' eps_mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub surrogate_gain: f64,
    /// `max_s |E_{a~mu'}[A_g(s, a)]|`.
    pub eps_g: f64,
    pub kl: f64,
    /// `sqrt(KL / 2)` from the stationary-weighted KL.
    pub eps_mu: f64,
    /// `max_s sqrt(KL_s / 2)`, the per-state worst case.
    pub eps_mu_max: f64,
    pub kemeny_new: f64,
    pub r_max: f64,
    /// `xi_-' - xi_-`.
    pub improvement: f64,
    pub lower_bound: f64,
    pub rho_l1: f64,
    pub rho_bound: f64,
}

impl BoundReport {
    pub fn improvement_holds(&self, slack: f64) -> bool {
        self.improvement >= self.lower_bound - slack
    }

    pub fn rho_holds(&self, slack: f64) -> bool {
        self.rho_l1 <= self.rho_bound + slack
    }
}

fn bound_from(
    mdp: &TabularMdp,
    old: &SurrogateEvaluation,
    policy_old: &TabularPolicy,
    new: &SurrogateEvaluation,
    policy_new: &TabularPolicy,
) -> Result<BoundReport> {
    let beta = old.beta;
    let pi = &old.analysis.pi;
    let surrogate_gain = expected_advantage(pi, policy_new, &old.adv_g);
    let eps_g = policy_new.expect(&old.adv_g).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let kl_states = kl_per_state(policy_new, policy_old)?;
    let kl: f64 = kl_states.iter().zip(pi).map(|(k, w)| k * w).sum();
    let eps_mu = (kl / 2.0).sqrt();
    let eps_mu_max = kl_states.iter().fold(0.0f64, |m, &k| m.max((k / 2.0).sqrt()));
    let kappa = new.analysis.kemeny();
    let r_max = mdp.r_max();
    let lower_bound = surrogate_gain
        - 2.0 * (kappa - 1.0) * eps_g * eps_mu
        - 12.0 * beta * kappa * kappa * r_max * r_max * eps_mu * eps_mu;
    let rho_old = old.analysis.state_action(policy_old);
    let rho_new = new.analysis.state_action(policy_new);
    let rho_l1 = rho_old
        .as_slice()
        .iter()
        .zip(rho_new.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(BoundReport {
        surrogate_gain,
        eps_g,
        kl,
        eps_mu,
        eps_mu_max,
        kemeny_new: kappa,
        r_max,
        improvement: new.xi_minus() - old.xi_minus(),
        lower_bound,
        rho_l1,
        rho_bound: 2.0 * kappa * eps_mu,
    })
}

pub fn trust_region_bound_report(
    mdp: &TabularMdp,
    policy_old: &TabularPolicy,
    policy_new: &TabularPolicy,
    beta: f64,
) -> Result<BoundReport> {
    let old = SurrogateEvaluation::new(mdp, policy_old, beta)?;
    let new = SurrogateEvaluation::new(mdp, policy_new, beta)?;
    bound_from(mdp, &old, policy_old, &new, policy_new)
}

/// Radius shrink factor after a rejected step.
const SHRINK: f64 = 0.5;
/// Give up once the radius is this fraction of the configured one.
const MIN_RADIUS_FRACTION: f64 = 1e-12;

/// Iterates trust-region steps from the configured initial policy until the
/// criterion, the policy and the optimality residual all settle.
///
/// The surrogate is only a local model of `xi_-`, so a step that lowers the
/// criterion is rejected and retried with half the radius. Accepted steps
/// that gain at least `convergence_tol` let the radius grow back towards
/// `config.eps_mu`; smaller gains halve it. Every attempt counts against
/// `max_iters` and appears in the trace.
pub fn msvtrpi(mdp: &TabularMdp, config: &SolverConfig) -> Result<SolverOutput> {
    config.validate()?;
    let mut policy = config.initial_policy(mdp.n_states(), mdp.n_actions());
    let mut eval = SurrogateEvaluation::new(mdp, &policy, config.beta)?;
    let mut trace = IterationTrace::default();
    let mut radius = config.eps_mu;
    let mut stop = StopReason::MaxIters;

    for iter in 0..config.max_iters {
        if radius < config.eps_mu * MIN_RADIUS_FRACTION {
            stop = StopReason::Stalled;
            break;
        }
        let step_config = SolverConfig {
            eps_mu: radius,
            ..config.clone()
        };
        let (next, diag) = step_from(&eval, &policy, &step_config)?;
        let next_eval = SurrogateEvaluation::new(mdp, &next, config.beta)?;
        let bound = bound_from(mdp, &eval, &policy, &next_eval, &next)?;
        let old_xi = eval.xi_minus();
        let new_xi = next_eval.xi_minus();
        let accepted = new_xi >= old_xi - 1e-13 * old_xi.abs().max(1.0);
        let mut record = TraceRecord::from_stats(iter, &eval.stats, config.beta);
        record.radius = radius;
        record.kl_step = diag.kl;
        record.dual_temperature = diag.dual_temperature;
        record.optimality_residual = diag.optimality_residual;
        record.lower_bound_rhs = bound.lower_bound;
        record.accepted = accepted;
        trace.records.push(record);

        if !accepted {
            radius *= SHRINK;
            continue;
        }
        // near a mixed optimum the closed form keeps spending the whole
        // budget while gaining nothing; shrink so the policy can settle
        radius = if new_xi - old_xi >= config.convergence_tol {
            (radius / SHRINK).min(config.eps_mu)
        } else {
            radius * SHRINK
        };
        let tv = tv_distance(&next, &policy, &eval.analysis.pi)?;
        policy = next;
        eval = next_eval;
        if (new_xi - old_xi).abs() < config.convergence_tol
            && tv < config.policy_tol
            && eval.optimality_residual() <= config.residual_tol
        {
            stop = StopReason::Converged;
            break;
        }
    }
    // only improving steps are kept, so the current policy is the best seen
    Ok(SolverOutput {
        optimality_residual: eval.optimality_residual(),
        stats: eval.stats,
        policy,
        trace,
        stop,
    })
}
