//! Risk statistics of the steady reward distribution, the pseudo reward `f`,
//! the surrogate reward `g`, and exact evaluation of the MSV difference and
//! derivative formulas.

use serde::{Deserialize, Serialize};

use crate::chain::ChainAnalysis;
use crate::error::{MsvError, Result};
use crate::mdp::{TabularMdp, TabularPolicy};
use crate::table::SaTable;

/// Absolute tolerance of the exact performance-difference identity.
pub const DIFF_IDENTITY_TOL: f64 = 1e-8;

/// `(x)_- = min(0, x)`; ties (`x == 0`) contribute nothing.
#[inline]
pub fn neg_part(x: f64) -> f64 {
    if x < 0.0 {
        x
    } else {
        0.0
    }
}

/// Long-run moments of the steady reward distribution of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskStats {
    /// Average reward.
    pub eta: f64,
    /// Variance.
    pub zeta: f64,
    /// Downside semivariance `E[(r - eta)_-^2]`.
    pub zeta_minus: f64,
    /// Semimean `E[(r - eta)_-]`, always `<= 0`.
    pub eta_minus: f64,
}

impl RiskStats {
    /// Moments of `reward` under the state-action weights `rho`.
    pub fn from_weights(rho: &SaTable, reward: &SaTable) -> Self {
        let weights = rho.as_slice();
        let rewards = reward.as_slice();
        let eta: f64 = weights.iter().zip(rewards).map(|(w, r)| w * r).sum();
        let (mut zeta, mut zeta_minus, mut eta_minus) = (0.0, 0.0, 0.0);
        for (&w, &r) in weights.iter().zip(rewards) {
            let d = r - eta;
            let dm = neg_part(d);
            zeta += w * d * d;
            zeta_minus += w * dm * dm;
            eta_minus += w * dm;
        }
        Self {
            eta,
            zeta,
            zeta_minus,
            eta_minus,
        }
    }

    /// `xi_- = eta - beta * zeta_-`.
    #[inline]
    pub fn xi_minus(&self, beta: f64) -> f64 {
        self.eta - beta * self.zeta_minus
    }

    /// Mean-variance criterion `eta - beta * zeta`.
    #[inline]
    pub fn xi(&self, beta: f64) -> f64 {
        self.eta - beta * self.zeta
    }
}

/// Risk trade-off and trust-region radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub beta: f64,
    pub eps_mu: f64,
}

impl RiskParams {
    pub fn new(beta: f64, eps_mu: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(MsvError::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        if !(eps_mu > 0.0) || !eps_mu.is_finite() {
            return Err(MsvError::InvalidParameter(format!("eps_mu must be > 0, got {eps_mu}")));
        }
        Ok(Self { beta, eps_mu })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(MsvError::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    Ok(())
}

pub fn risk_stats_with(analysis: &ChainAnalysis, mdp: &TabularMdp, policy: &TabularPolicy) -> RiskStats {
    RiskStats::from_weights(&analysis.state_action(policy), mdp.reward())
}

pub fn risk_stats(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<RiskStats> {
    let analysis = ChainAnalysis::new(mdp, policy)?;
    Ok(risk_stats_with(&analysis, mdp, policy))
}

pub fn msv_value(stats: &RiskStats, beta: f64) -> f64 {
    stats.xi_minus(beta)
}

pub fn mv_value(mdp: &TabularMdp, policy: &TabularPolicy, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(risk_stats(mdp, policy)?.xi(beta))
}

/// Pseudo reward `f = r - beta (r - lambda)_-^2` with a frozen pseudo mean.
pub fn surrogate_f(mdp: &TabularMdp, lambda: f64, beta: f64) -> SaTable {
    mdp.reward().map(|r| {
        let d = neg_part(r - lambda);
        r - beta * d * d
    })
}

/// Surrogate reward `g = (1 + 2 beta eta_-) r - beta (r - eta)_-^2` at the
/// current policy's statistics.
pub fn surrogate_g(mdp: &TabularMdp, stats: &RiskStats, beta: f64) -> SaTable {
    mdp.reward()
        .map(|r| surrogate_g_value(r, stats.eta, stats.eta_minus, beta))
}

#[inline]
pub fn surrogate_g_value(r: f64, eta: f64, eta_minus: f64, beta: f64) -> f64 {
    let d = neg_part(r - eta);
    (1.0 + 2.0 * beta * eta_minus) * r - beta * d * d
}

/// Everything the exact solvers need about one policy: chain analysis, risk
/// statistics, the surrogate reward and its advantage.
#[derive(Debug, Clone)]
pub struct SurrogateEvaluation {
    pub analysis: ChainAnalysis,
    pub stats: RiskStats,
    pub beta: f64,
    pub g: SaTable,
    pub adv_g: SaTable,
}

impl SurrogateEvaluation {
    pub fn new(mdp: &TabularMdp, policy: &TabularPolicy, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let analysis = ChainAnalysis::new(mdp, policy)?;
        Self::with_analysis(analysis, mdp, policy, beta)
    }

    pub fn with_analysis(analysis: ChainAnalysis, mdp: &TabularMdp, policy: &TabularPolicy, beta: f64) -> Result<Self> {
        let stats = risk_stats_with(&analysis, mdp, policy);
        let g = surrogate_g(mdp, &stats, beta);
        let adv_g = analysis.differential_values(mdp, policy, &g)?.adv;
        Ok(Self {
            analysis,
            stats,
            beta,
            g,
            adv_g,
        })
    }

    #[inline]
    pub fn xi_minus(&self) -> f64 {
        self.stats.xi_minus(self.beta)
    }

    /// `max_{s,a} A_g(s, a)`; nonpositive at a local optimum.
    pub fn optimality_residual(&self) -> f64 {
        self.adv_g.max()
    }
}

/// Terms of the exact MSV performance-difference identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsvDiffReport {
    /// `xi_-' - xi_-` from two independent evaluations.
    pub lhs: f64,
    /// `E_{pi', mu'}[A_f^mu]` with `f` frozen at `lambda = eta`.
    pub advantage_term: f64,
    /// `-beta E_{pi', mu'}[(r - eta')_-^2 - (r - eta)_-^2]`.
    pub mean_shift_term: f64,
    pub rhs: f64,
}

impl MsvDiffReport {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Computes both sides of the difference identity without asserting it.
/// `adv_offset` is added to every pseudo advantage; it is a sensitivity hook
/// for the verification harness and is zero in normal use.
pub fn msv_difference_terms(
    mdp: &TabularMdp,
    policy_old: &TabularPolicy,
    policy_new: &TabularPolicy,
    beta: f64,
    adv_offset: f64,
) -> Result<MsvDiffReport> {
    check_beta(beta)?;
    let old = ChainAnalysis::new(mdp, policy_old)?;
    let new = ChainAnalysis::new(mdp, policy_new)?;
    let stats_old = risk_stats_with(&old, mdp, policy_old);
    let stats_new = risk_stats_with(&new, mdp, policy_new);
    let lhs = stats_new.xi_minus(beta) - stats_old.xi_minus(beta);

    let f = surrogate_f(mdp, stats_old.eta, beta);
    let adv_f = old.differential_values(mdp, policy_old, &f)?.adv;
    let rho_new = new.state_action(policy_new);
    let advantage_term: f64 = rho_new
        .as_slice()
        .iter()
        .zip(adv_f.as_slice())
        .map(|(w, a)| w * (a + adv_offset))
        .sum();
    let shift: f64 = rho_new
        .as_slice()
        .iter()
        .zip(mdp.reward().as_slice())
        .map(|(w, &r)| {
            let dn = neg_part(r - stats_new.eta);
            let d = neg_part(r - stats_old.eta);
            w * (dn * dn - d * d)
        })
        .sum();
    let mean_shift_term = -beta * shift;
    Ok(MsvDiffReport {
        lhs,
        advantage_term,
        mean_shift_term,
        rhs: advantage_term + mean_shift_term,
    })
}

/// Exact MSV performance difference between two policies. A gap beyond
/// [`DIFF_IDENTITY_TOL`] is reported as an internal-consistency error.
pub fn msv_difference_exact(
    mdp: &TabularMdp,
    policy_old: &TabularPolicy,
    policy_new: &TabularPolicy,
    beta: f64,
) -> Result<MsvDiffReport> {
    let report = msv_difference_terms(mdp, policy_old, policy_new, beta, 0.0)?;
    if report.gap() > DIFF_IDENTITY_TOL {
        return Err(MsvError::Consistency(format!(
            "difference identity off by {:e} (lhs {}, rhs {})",
            report.gap(),
            report.lhs,
            report.rhs
        )));
    }
    Ok(report)
}

/// Derivative of `xi_-` along the mixture `(1 - nu) mu + nu mu'` at `nu = 0`:
/// `E_{s~pi, a~mu'}[A_g(s, a)]`.
pub fn msv_directional_derivative(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    direction_policy: &TabularPolicy,
    beta: f64,
) -> Result<f64> {
    mdp.check_policy(direction_policy)?;
    let eval = SurrogateEvaluation::new(mdp, policy, beta)?;
    Ok(expected_advantage(&eval.analysis.pi, direction_policy, &eval.adv_g))
}

/// `E_{s~pi, a~mu}[adv(s, a)]`.
pub fn expected_advantage(pi: &[f64], policy: &TabularPolicy, adv: &SaTable) -> f64 {
    policy.expect(adv).iter().zip(pi).map(|(x, w)| w * x).sum()
}

/// Score-function gradient over softmax logits:
/// `d/d theta(s, b) = pi(s) sum_a mu(a|s) (1[a = b] - mu(b|s)) adv(s, a)`.
pub fn softmax_policy_gradient(pi: &[f64], policy: &TabularPolicy, adv: &SaTable) -> SaTable {
    let (n_states, n_actions) = (policy.n_states(), policy.n_actions());
    let mut grad = SaTable::zeros(n_states, n_actions);
    for s in 0..n_states {
        let mu = policy.probs().row(s);
        let mean: f64 = mu.iter().zip(adv.row(s)).map(|(p, a)| p * a).sum();
        for b in 0..n_actions {
            grad[(s, b)] = pi[s] * mu[b] * (adv[(s, b)] - mean);
        }
    }
    grad
}

/// Exact MSV policy gradient `E[grad log mu(a|s) A_g(s, a)]` over logits.
pub fn msv_policy_gradient_exact(mdp: &TabularMdp, policy: &TabularPolicy, beta: f64) -> Result<SaTable> {
    let eval = SurrogateEvaluation::new(mdp, policy, beta)?;
    Ok(softmax_policy_gradient(&eval.analysis.pi, policy, &eval.adv_g))
}

/// Exact average-reward policy gradient `E[grad log mu(a|s) A_eta(s, a)]`.
pub fn average_reward_policy_gradient(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<SaTable> {
    let analysis = ChainAnalysis::new(mdp, policy)?;
    let adv = analysis.differential_values(mdp, policy, mdp.reward())?.adv;
    Ok(softmax_policy_gradient(&analysis.pi, policy, &adv))
}

/// `max_{s,a} A_g(s, a)` under `policy`.
pub fn optimality_residual(mdp: &TabularMdp, policy: &TabularPolicy, beta: f64) -> Result<f64> {
    Ok(SurrogateEvaluation::new(mdp, policy, beta)?.optimality_residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::figure1::{figure1_mdp, LEFT, RIGHT};

    #[test]
    fn neg_part_tie_is_zero() {
        assert_eq!(neg_part(0.0), 0.0);
        assert_eq!(neg_part(-0.5), -0.5);
        assert_eq!(neg_part(0.5), 0.0);
    }

    #[test]
    fn f_is_r_without_downside() {
        let mdp = figure1_mdp();
        assert_eq!(surrogate_f(&mdp, 0.3, 0.0), *mdp.reward());
        assert_eq!(surrogate_f(&mdp, -5.0, 3.0), *mdp.reward());
    }

    #[test]
    fn f_arithmetic() {
        // r = -2, lambda = 0, beta = 1 -> -2 - 4
        let d = neg_part(-2.0);
        assert_eq!(-2.0 - d * d, -6.0);
        let mdp = figure1_mdp();
        let f = surrogate_f(&mdp, 0.0, 1.0);
        let (s, a) = crate::envs::figure1::reward_cell(&mdp, -2.0).unwrap();
        assert_eq!(f[(s, a)], -6.0);
    }

    #[test]
    fn g_at_left_policy() {
        let mdp = figure1_mdp();
        let left = crate::envs::figure1::pure_policy(LEFT);
        let stats = risk_stats(&mdp, &left).unwrap();
        assert!((stats.eta_minus + 2.0 / 3.0).abs() < 1e-12);
        let g = surrogate_g(&mdp, &stats, 1.0);
        let (s, a) = crate::envs::figure1::reward_cell(&mdp, -2.0).unwrap();
        assert!((g[(s, a)] + 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn g_reduces_to_r_and_f() {
        let mdp = figure1_mdp();
        let stats = RiskStats {
            eta: 0.25,
            zeta: 1.0,
            zeta_minus: 0.5,
            eta_minus: 0.0,
        };
        assert_eq!(surrogate_g(&mdp, &stats, 0.0), *mdp.reward());
        assert_eq!(surrogate_g(&mdp, &stats, 2.0), surrogate_f(&mdp, 0.25, 2.0));
    }

    #[test]
    fn msv_values_of_the_two_paths() {
        let mdp = figure1_mdp();
        let l = risk_stats(&mdp, &crate::envs::figure1::pure_policy(LEFT)).unwrap();
        let r = risk_stats(&mdp, &crate::envs::figure1::pure_policy(RIGHT)).unwrap();
        assert!((msv_value(&l, 1.0) + 4.0 / 3.0).abs() < 1e-10);
        assert!((msv_value(&r, 1.0) + 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(msv_value(&l, 0.0), l.eta);
        assert!((l.xi(1.0) + 2.0).abs() < 1e-10 && (r.xi(1.0) + 2.0).abs() < 1e-10);
    }

    #[test]
    fn difference_left_to_right() {
        let mdp = figure1_mdp();
        let l = crate::envs::figure1::pure_policy(LEFT);
        let r = crate::envs::figure1::pure_policy(RIGHT);
        let rep = msv_difference_exact(&mdp, &l, &r, 1.0).unwrap();
        assert!((rep.lhs - 2.0 / 3.0).abs() < 1e-10);
        let same = msv_difference_exact(&mdp, &l, &l, 1.0).unwrap();
        assert!(same.lhs.abs() < 1e-12 && same.rhs.abs() < 1e-10);
    }

    #[test]
    fn single_state_single_action_residual_is_zero() {
        let mdp = TabularMdp::from_dense(&[vec![vec![1.0]]], &[vec![0.7]], None).unwrap();
        let res = optimality_residual(&mdp, &TabularPolicy::uniform(1, 1), 1.0).unwrap();
        assert!(res.abs() < 1e-15);
    }

    #[test]
    fn negative_beta_rejected() {
        let mdp = figure1_mdp();
        assert!(mv_value(&mdp, &TabularPolicy::uniform(5, 2), -1.0).is_err());
        assert!(RiskParams::new(1.0, 0.0).is_err());
    }
}
