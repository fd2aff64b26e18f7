//! Exact analysis of policy-induced Markov chains: stationary distribution,
//! fundamental matrix, Kemeny's constant, first-passage times and the
//! Poisson equation.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef};

use crate::error::{MsvError, Result};
use crate::mdp::{check_irreducible, induced_chain, TabularMdp, TabularPolicy};
use crate::table::SaTable;

/// Condition-number estimate above which the fundamental matrix carries a
/// warning.
pub const CONDITION_WARN: f64 = 1e12;

const STOCHASTIC_TOL: f64 = 1e-10;

fn check_stochastic(p: MatRef<'_, f64>) -> Result<()> {
    let n = p.nrows();
    if p.ncols() != n || n == 0 {
        return Err(MsvError::Dimension(format!(
            "transition matrix must be square and nonempty, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let x = p[(i, j)];
            if !(x >= 0.0) {
                return Err(MsvError::InvalidModel(format!("P[{i},{j}] = {x} is negative")));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MsvError::InvalidModel(format!("row {i} of P sums to {sum}")));
        }
    }
    check_irreducible(n, |i| (0..n).filter(move |&j| p[(i, j)] > 0.0))
}

/// Unique stationary distribution of an irreducible chain.
///
/// Solves `(P^T - I) pi = 0` with the last equation replaced by `sum pi = 1`.
pub fn stationary_distribution(p: MatRef<'_, f64>) -> Result<Vec<f64>> {
    check_stochastic(p)?;
    let n = p.nrows();
    let mut a = Mat::<f64>::from_fn(n, n, |i, j| p[(j, i)] - if i == j { 1.0 } else { 0.0 });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = Mat::<f64>::zeros(n, 1);
    rhs[(n - 1, 0)] = 1.0;
    let x = a.partial_piv_lu().solve(&rhs);
    let pi: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if pi.iter().any(|x| !x.is_finite()) {
        return Err(MsvError::Singular {
            reason: "stationary system is singular".into(),
            block: Vec::new(),
        });
    }
    // round-off can leave entries of order -1e-17
    Ok(pi.into_iter().map(|x| x.max(0.0)).collect())
}

/// Fundamental matrix `Z = (I - P + e pi)^-1` and Kemeny's constant.
#[derive(Debug, Clone)]
pub struct Fundamental {
    pub z: Mat<f64>,
    /// `trace(Z)`; equals `1 + sum_j pi_j m(i, j)` for every `i`.
    pub kemeny: f64,
    /// 1-norm condition estimate of `I - P + e pi`.
    pub condition: f64,
    pub warning: Option<String>,
}

pub fn fundamental_matrix(p: MatRef<'_, f64>, pi: &[f64]) -> Result<Fundamental> {
    let n = p.nrows();
    if p.ncols() != n || pi.len() != n {
        return Err(MsvError::Dimension(format!(
            "P is {}x{}, pi has {} entries",
            p.nrows(),
            p.ncols(),
            pi.len()
        )));
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| (if i == j { 1.0 } else { 0.0 }) - p[(i, j)] + pi[j]);
    let z = a.partial_piv_lu().inverse();
    let kemeny = (0..n).map(|i| z[(i, i)]).sum::<f64>();
    if !kemeny.is_finite() {
        return Err(MsvError::Singular {
            reason: "I - P + e pi is singular".into(),
            block: Vec::new(),
        });
    }
    let condition = one_norm(a.as_ref()) * one_norm(z.as_ref());
    let warning = (condition > CONDITION_WARN)
        .then(|| format!("fundamental matrix is ill-conditioned (cond_1 ~ {condition:.3e})"));
    Ok(Fundamental {
        z,
        kemeny,
        condition,
        warning,
    })
}

fn one_norm(a: MatRef<'_, f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Expected hitting times `m(i, j)` with `m(i, i) = 0`.
///
/// Solved target by target from `m(i, j) = 1 + sum_{k != j} P(i, k) m(k, j)`,
/// independently of the fundamental matrix. Cost is `O(n^4)`.
pub fn mean_first_passage_times(p: MatRef<'_, f64>) -> Result<Mat<f64>> {
    check_stochastic(p)?;
    let n = p.nrows();
    let mut m = Mat::<f64>::zeros(n, n);
    if n == 1 {
        return Ok(m);
    }
    for j in 0..n {
        let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
        let k = others.len();
        let a = Mat::<f64>::from_fn(k, k, |r, c| {
            (if r == c { 1.0 } else { 0.0 }) - p[(others[r], others[c])]
        });
        let ones = Mat::<f64>::from_fn(k, 1, |_, _| 1.0);
        let x = a.partial_piv_lu().solve(&ones);
        for (r, &i) in others.iter().enumerate() {
            let v = x[(r, 0)];
            if !v.is_finite() {
                return Err(MsvError::Singular {
                    reason: format!("first-passage system for target {j} is singular"),
                    block: vec![j],
                });
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Exact long-run analysis of the chain induced by a policy.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub pi: Vec<f64>,
    pub p_mu: Mat<f64>,
    pub fundamental: Fundamental,
}

impl ChainAnalysis {
    pub fn new(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Self> {
        let p_mu = induced_chain(mdp, policy)?;
        Self::from_matrix(p_mu)
    }

    pub fn from_matrix(p_mu: Mat<f64>) -> Result<Self> {
        let pi = stationary_distribution(p_mu.as_ref())?;
        let fundamental = fundamental_matrix(p_mu.as_ref(), &pi)?;
        Ok(Self { pi, p_mu, fundamental })
    }

    #[inline]
    pub fn kemeny(&self) -> f64 {
        self.fundamental.kemeny
    }

    /// Steady state-action distribution `rho(s, a) = pi(s) mu(a|s)`.
    pub fn state_action(&self, policy: &TabularPolicy) -> SaTable {
        SaTable::from_fn(policy.n_states(), policy.n_actions(), |s, a| {
            self.pi[s] * policy.prob(s, a)
        })
    }

    /// Differential value functions of `reward` under `policy`, pinned by
    /// `pi . v = 0`.
    pub fn differential_values(
        &self,
        mdp: &TabularMdp,
        policy: &TabularPolicy,
        reward: &SaTable,
    ) -> Result<DifferentialValues> {
        mdp.check_policy(policy)?;
        reward.check_shape(mdp.n_states(), mdp.n_actions(), "reward table")?;
        let n = mdp.n_states();
        let r_mu = policy.expect(reward);
        let average: f64 = self.pi.iter().zip(&r_mu).map(|(p, r)| p * r).sum();
        // v = Z (r_mu - average e); pi Z = pi gives pi . v = 0
        let centered: Vec<f64> = r_mu.iter().map(|r| r - average).collect();
        let z = &self.fundamental.z;
        let v: Vec<f64> = (0..n).map(|i| (0..n).map(|j| z[(i, j)] * centered[j]).sum()).collect();
        let q = SaTable::from_fn(n, mdp.n_actions(), |s, a| {
            reward[(s, a)] - average + mdp.expected_next(s, a, &v)
        });
        let adv = SaTable::from_fn(n, mdp.n_actions(), |s, a| q[(s, a)] - v[s]);
        Ok(DifferentialValues { average, v, q, adv })
    }
}

/// Average reward and differential value functions of a reward table.
#[derive(Debug, Clone)]
pub struct DifferentialValues {
    pub average: f64,
    pub v: Vec<f64>,
    pub q: SaTable,
    pub adv: SaTable,
}

/// Poisson-equation solution for `reward_table` under `policy`.
pub fn differential_values(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    reward_table: &SaTable,
) -> Result<DifferentialValues> {
    ChainAnalysis::new(mdp, policy)?.differential_values(mdp, policy, reward_table)
}

/// `max_i |((I - P) v + average e - r_mu)_i|`.
pub fn poisson_residual(
    analysis: &ChainAnalysis,
    policy: &TabularPolicy,
    reward: &SaTable,
    values: &DifferentialValues,
) -> f64 {
    let p = &analysis.p_mu;
    let n = p.nrows();
    let r_mu = policy.expect(reward);
    (0..n)
        .map(|i| {
            let pv: f64 = (0..n).map(|j| p[(i, j)] * values.v[j]).sum();
            (values.v[i] - pv + values.average - r_mu[i]).abs()
        })
        .fold(0.0, f64::max)
}
