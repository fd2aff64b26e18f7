//! Two-path toy MDP: both paths have mean 0 and variance 2, but the left
//! path's losses are concentrated in one large drop.
//!
//! State 0 is the decision state. Going left emits -2 and walks the cycle
//! 0 -> 1 -> 2 -> 0 emitting +1, +1; going right emits +2 and walks
//! 0 -> 3 -> 4 -> 0 emitting -1, -1. Actions are irrelevant outside state 0.

use crate::mdp::{TabularMdp, TabularPolicy};
use crate::table::SaTable;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const DECISION_STATE: usize = 0;

pub fn figure1_mdp() -> TabularMdp {
    const N: usize = 5;
    let edge = |to: usize| vec![(to, 1.0)];
    // (next state, reward) for states 1..=4, both actions alike
    let cycle = [(2, 1.0), (0, 1.0), (4, -1.0), (0, -1.0)];
    let mut transitions = vec![edge(1), edge(3)];
    let mut reward = vec![-2.0, 2.0];
    for &(next, r) in &cycle {
        transitions.push(edge(next));
        transitions.push(edge(next));
        reward.extend([r, r]);
    }
    TabularMdp::new(
        N,
        2,
        transitions,
        SaTable::from_vec(N, 2, reward).expect("static shape"),
        Some(2.0),
    )
    .expect("toy MDP is valid")
}

/// Pure policy taking `direction` at the decision state.
pub fn pure_policy(direction: usize) -> TabularPolicy {
    TabularPolicy::deterministic(2, &[direction, 0, 0, 0, 0]).expect("valid action")
}

/// First `(state, action)` cell carrying the given reward.
pub fn reward_cell(mdp: &TabularMdp, value: f64) -> Option<(usize, usize)> {
    let r = mdp.reward();
    (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .find(|&(s, a)| r[(s, a)] == value)
}
