//! Mean-variance policy iteration baseline: each iteration freezes the
//! current mean `eta_k`, evaluates the pseudo reward `r - beta (r - eta_k)^2`
//! and improves greedily.

use std::collections::HashSet;

use crate::chain::ChainAnalysis;
use crate::error::Result;
use crate::mdp::{TabularMdp, TabularPolicy};
use crate::msv::{risk_stats_with, SurrogateEvaluation};

use super::{IterationTrace, SolverConfig, SolverOutput, StopReason, TraceRecord};

/// Actions within this of the best Q value count as ties.
const TIE_TOL: f64 = 1e-10;

fn greedy(q_row: &[f64]) -> usize {
    let best = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1.0);
    q_row.iter().position(|&q| q >= best - tol).unwrap_or(0)
}

/// Starts from the configured initial policy; ties go to the lowest action
/// index. Stops when the greedy policy repeats the current one, or flags a
/// cycle when it revisits an older one. `trace.xi_minus` holds the MSV value
/// so runs are comparable; the MV value is `eta - beta * zeta`.
pub fn mvpi(mdp: &TabularMdp, config: &SolverConfig) -> Result<SolverOutput> {
    config.validate()?;
    let beta = config.beta;
    let mut policy = config.initial_policy(mdp.n_states(), mdp.n_actions());
    let mut trace = IterationTrace::default();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut best: Option<(f64, TabularPolicy)> = None;
    let mut stop = StopReason::MaxIters;

    for iter in 0..config.max_iters {
        let analysis = ChainAnalysis::new(mdp, &policy)?;
        let stats = risk_stats_with(&analysis, mdp, &policy);
        if best.as_ref().is_none_or(|(xi, _)| stats.xi(beta) > *xi) {
            best = Some((stats.xi(beta), policy.clone()));
        }
        let h = mdp.reward().map(|r| r - beta * (r - stats.eta).powi(2));
        let q = analysis.differential_values(mdp, &policy, &h)?.q;
        trace.records.push(TraceRecord::from_stats(iter, &stats, beta));

        let actions: Vec<usize> = q.rows().map(greedy).collect();
        let next = TabularPolicy::deterministic(mdp.n_actions(), &actions)?;
        if next == policy {
            stop = StopReason::Converged;
            break;
        }
        if !seen.insert(actions) {
            stop = StopReason::Cycle;
            break;
        }
        policy = next;
    }

    let policy = match stop {
        StopReason::Converged => policy,
        _ => best.map(|(_, p)| p).unwrap_or(policy),
    };
    let eval = SurrogateEvaluation::new(mdp, &policy, beta)?;
    Ok(SolverOutput {
        stats: eval.stats,
        optimality_residual: eval.optimality_residual(),
        policy,
        trace,
        stop,
    })
}
