//! Tabular MDP and softmax policy data model.

use std::collections::VecDeque;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{MsvError, Result};
use crate::table::SaTable;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Largest gap kept between the best and worst logit of a state. Keeps every
/// probability strictly positive (e^-200 ~ 1e-87) while representing
/// deterministic policies to double precision; products of a few such
/// probabilities stay clear of subnormal floats, which are very slow.
pub const MAX_LOGIT_SPREAD: f64 = 200.0;

/// Finite-state, finite-action MDP with a bounded deterministic reward.
///
/// Transitions are stored as sparse rows per `(state, action)`; the
/// long-run analysis works on dense matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<(usize, f64)>>,
    reward: SaTable,
    r_max: f64,
}

impl TabularMdp {
    /// Builds and validates an MDP from sparse transition rows indexed by
    /// `s * n_actions + a`. `r_max` defaults to `max |reward|`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        reward: SaTable,
        r_max: Option<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(MsvError::InvalidModel("n_states and n_actions must be positive".into()));
        }
        if transitions.len() != n_states * n_actions {
            return Err(MsvError::Dimension(format!(
                "expected {} transition rows, got {}",
                n_states * n_actions,
                transitions.len()
            )));
        }
        reward.check_shape(n_states, n_actions, "reward")?;

        let mut transitions = transitions;
        for (idx, row) in transitions.iter_mut().enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            let mut sum = 0.0;
            for &(next, p) in row.iter() {
                if next >= n_states {
                    return Err(MsvError::InvalidModel(format!(
                        "transition row (s={s}, a={a}) points to state {next} >= {n_states}"
                    )));
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(MsvError::InvalidModel(format!(
                        "transition row (s={s}, a={a}) has invalid probability {p} for next state {next}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MsvError::InvalidModel(format!(
                    "transition row (s={s}, a={a}) sums to {sum:.15}, not 1"
                )));
            }
            row.retain(|&(_, p)| p > 0.0);
            row.sort_by_key(|&(next, _)| next);
        }

        if let Some((idx, r)) = reward.as_slice().iter().enumerate().find(|(_, r)| !r.is_finite()) {
            return Err(MsvError::InvalidModel(format!(
                "reward at (s={}, a={}) is not finite: {r}",
                idx / n_actions,
                idx % n_actions
            )));
        }
        let max_abs = reward.max_abs();
        let r_max = r_max.unwrap_or(max_abs);
        if max_abs > r_max {
            let idx = reward.as_slice().iter().position(|r| r.abs() > r_max).unwrap_or(0);
            return Err(MsvError::InvalidModel(format!(
                "|reward(s={}, a={})| = {} exceeds r_max = {r_max}",
                idx / n_actions,
                idx % n_actions,
                reward.as_slice()[idx].abs()
            )));
        }

        let mdp = Self {
            n_states,
            n_actions,
            transitions,
            reward,
            r_max,
        };
        let m = &mdp;
        check_irreducible(n_states, |s| {
            (0..n_actions).flat_map(move |a| m.successors(s, a).iter().map(|&(n, _)| n))
        })?;
        Ok(mdp)
    }

    /// Builds an MDP from a dense `S x A x S` transition tensor.
    pub fn from_dense(transition: &[Vec<Vec<f64>>], reward: &[Vec<f64>], r_max: Option<f64>) -> Result<Self> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(n_states * n_actions);
        for (s, per_action) in transition.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(MsvError::Dimension(format!(
                    "transition[{s}] has {} actions, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (a, probs) in per_action.iter().enumerate() {
                if probs.len() != n_states {
                    return Err(MsvError::Dimension(format!(
                        "transition[{s}][{a}] has {} entries, expected {n_states}",
                        probs.len()
                    )));
                }
                rows.push(probs.iter().copied().enumerate().collect());
            }
        }
        let reward = SaTable::from_rows(reward)?;
        Self::new(n_states, n_actions, rows, reward, r_max)
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn reward(&self) -> &SaTable {
        &self.reward
    }

    #[inline]
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Nonzero `(next_state, probability)` pairs of `P(. | s, a)`.
    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.successors(s, a)
            .iter()
            .find(|&&(n, _)| n == next)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Dense `S x A x S` transition tensor.
    pub fn dense_transitions(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        let mut row = vec![0.0; self.n_states];
                        for &(n, p) in self.successors(s, a) {
                            row[n] = p;
                        }
                        row
                    })
                    .collect()
            })
            .collect()
    }

    /// `sum_s' P(s'|s,a) v(s')`.
    #[inline]
    pub fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.successors(s, a).iter().map(|&(n, p)| p * v[n]).sum()
    }

    /// Same dynamics with a different reward table.
    pub fn with_reward(&self, reward: SaTable) -> Result<Self> {
        reward.check_shape(self.n_states, self.n_actions, "reward")?;
        let r_max = reward.max_abs();
        Ok(Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions: self.transitions.clone(),
            reward,
            r_max,
        })
    }

    pub fn check_policy(&self, policy: &TabularPolicy) -> Result<()> {
        if (policy.n_states(), policy.n_actions()) != (self.n_states, self.n_actions) {
            return Err(MsvError::Dimension(format!(
                "policy is {}x{}, MDP is {}x{}",
                policy.n_states(),
                policy.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }
}

/// Breadth-first reachability check: every state reaches state 0 and is
/// reachable from it.
pub fn check_irreducible<I>(n: usize, successors: impl Fn(usize) -> I) -> Result<()>
where
    I: IntoIterator<Item = usize>,
{
    let mut forward = vec![false; n];
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut queue = VecDeque::from([0]);
    forward[0] = true;
    for s in 0..n {
        for next in successors(s) {
            reverse[next].push(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for next in successors(s) {
            if !forward[next] {
                forward[next] = true;
                queue.push_back(next);
            }
        }
    }
    let mut backward = vec![false; n];
    backward[0] = true;
    queue.push_back(0);
    while let Some(s) = queue.pop_front() {
        for &prev in &reverse[s] {
            if !backward[prev] {
                backward[prev] = true;
                queue.push_back(prev);
            }
        }
    }
    let unreachable: Vec<usize> = (0..n).filter(|&s| !forward[s]).collect();
    if !unreachable.is_empty() {
        return Err(MsvError::Singular {
            reason: "states unreachable from state 0".into(),
            block: unreachable,
        });
    }
    let trapped: Vec<usize> = (0..n).filter(|&s| !backward[s]).collect();
    if !trapped.is_empty() {
        return Err(MsvError::Singular {
            reason: "states that never return to state 0 (closed class)".into(),
            block: trapped,
        });
    }
    Ok(())
}

/// Stochastic policy parameterized by per-state softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    logits: SaTable,
    probs: SaTable,
}

impl TabularPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::from_logits(SaTable::zeros(n_states, n_actions))
    }

    /// Logits are clamped so that no action trails the best one by more
    /// than [`MAX_LOGIT_SPREAD`].
    pub fn from_logits(mut logits: SaTable) -> Self {
        let (n_states, n_actions) = logits.shape();
        let mut probs = SaTable::zeros(n_states, n_actions);
        for s in 0..n_states {
            let row = logits.row_mut(s);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for x in row.iter_mut() {
                *x = x.max(max - MAX_LOGIT_SPREAD);
            }
            let p = probs.row_mut(s);
            let mut z = 0.0;
            for (pa, &x) in p.iter_mut().zip(row.iter()) {
                *pa = (x - max).exp();
                z += *pa;
            }
            p.iter_mut().for_each(|x| *x /= z);
        }
        Self { logits, probs }
    }

    /// Zero probabilities map to the most negative admissible logit.
    pub fn from_probs(probs: &SaTable) -> Result<Self> {
        for (s, row) in probs.rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(MsvError::InvalidParameter(format!(
                    "policy row {s} is not a distribution (sum {sum})"
                )));
            }
        }
        let logits = probs.map(|p| if p > 0.0 { p.ln() } else { -MAX_LOGIT_SPREAD - 1.0 });
        Ok(Self::from_logits(logits))
    }

    /// Policy putting all but `e^-200` mass on `actions[s]` in each state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(MsvError::Range(format!("action {a} >= {n_actions}")));
        }
        let logits = SaTable::from_fn(actions.len(), n_actions, |s, a| {
            if a == actions[s] {
                0.0
            } else {
                -MAX_LOGIT_SPREAD
            }
        });
        Ok(Self::from_logits(logits))
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.logits.n_states()
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.logits.n_actions()
    }

    #[inline]
    pub fn logits(&self) -> &SaTable {
        &self.logits
    }

    #[inline]
    pub fn probs(&self) -> &SaTable {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    /// Most probable action per state (lowest index on ties).
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.probs
            .rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (a, &p)| if p > best.1 { (a, p) } else { best },
                    )
                    .0
            })
            .collect()
    }

    /// Mixed policy `(1 - nu) * self + nu * other`.
    pub fn mixture(&self, other: &Self, nu: f64) -> Result<Self> {
        check_same_shape(self, other)?;
        let mixed = SaTable::from_fn(self.n_states(), self.n_actions(), |s, a| {
            (1.0 - nu) * self.prob(s, a) + nu * other.prob(s, a)
        });
        Self::from_probs(&mixed)
    }

    /// `sum_a mu(a|s) table(s, a)` for each state.
    pub fn expect(&self, table: &SaTable) -> Vec<f64> {
        self.probs
            .rows()
            .zip(table.rows())
            .map(|(p, t)| p.iter().zip(t).map(|(p, t)| p * t).sum())
            .collect()
    }
}

fn check_same_shape(a: &TabularPolicy, b: &TabularPolicy) -> Result<()> {
    if (a.n_states(), a.n_actions()) != (b.n_states(), b.n_actions()) {
        return Err(MsvError::Dimension(format!(
            "policies are {}x{} and {}x{}",
            a.n_states(),
            a.n_actions(),
            b.n_states(),
            b.n_actions()
        )));
    }
    Ok(())
}

fn check_distribution_len(pi: &[f64], n: usize) -> Result<()> {
    if pi.len() != n {
        return Err(MsvError::Dimension(format!(
            "state distribution has {} entries, expected {n}",
            pi.len()
        )));
    }
    Ok(())
}

/// Policy-induced transition matrix `P_mu(s, s') = sum_a mu(a|s) P(s'|s,a)`.
pub fn induced_chain(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Mat<f64>> {
    mdp.check_policy(policy)?;
    let n = mdp.n_states();
    let mut p = Mat::<f64>::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for &(next, q) in mdp.successors(s, a) {
                p[(s, next)] += w * q;
            }
        }
    }
    Ok(p)
}

/// Per-state total variation distances `1/2 sum_a |mu_a - mu_b|`.
pub fn tv_per_state(policy_a: &TabularPolicy, policy_b: &TabularPolicy) -> Result<Vec<f64>> {
    check_same_shape(policy_a, policy_b)?;
    Ok(policy_a
        .probs()
        .rows()
        .zip(policy_b.probs().rows())
        .map(|(p, q)| 0.5 * p.iter().zip(q).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .collect())
}

/// Stationary-weighted total variation distance between two policies.
pub fn tv_distance(policy_a: &TabularPolicy, policy_b: &TabularPolicy, pi: &[f64]) -> Result<f64> {
    check_distribution_len(pi, policy_a.n_states())?;
    Ok(tv_per_state(policy_a, policy_b)?
        .iter()
        .zip(pi)
        .map(|(tv, w)| w * tv)
        .sum())
}

/// Per-state `KL(mu_new(.|s) || mu_old(.|s))`.
pub fn kl_per_state(policy_new: &TabularPolicy, policy_old: &TabularPolicy) -> Result<Vec<f64>> {
    check_same_shape(policy_new, policy_old)?;
    policy_new
        .probs()
        .rows()
        .zip(policy_old.probs().rows())
        .enumerate()
        .map(|(s, (p, q))| {
            let mut kl = 0.0;
            for (a, (&p, &q)) in p.iter().zip(q).enumerate() {
                if p == 0.0 {
                    continue;
                }
                if q == 0.0 {
                    return Err(MsvError::Domain(format!(
                        "old policy has zero probability at (s={s}, a={a}) where the new one does not"
                    )));
                }
                kl += p * (p / q).ln();
            }
            Ok(kl.max(0.0))
        })
        .collect()
}

/// Stationary-weighted KL divergence `E_{s~pi} KL(mu_new || mu_old)`.
pub fn kl_divergence(policy_new: &TabularPolicy, policy_old: &TabularPolicy, pi: &[f64]) -> Result<f64> {
    check_distribution_len(pi, policy_new.n_states())?;
    Ok(kl_per_state(policy_new, policy_old)?
        .iter()
        .zip(pi)
        .map(|(kl, w)| w * kl)
        .sum())
}
