//! Seeded oracle checks on random ergodic instances: the exact difference
//! identity, finite-difference checks of the derivative and gradient, the
//! trust-region bounds along solver steps, and chain-analysis consistency.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{mean_first_passage_times, poisson_residual, ChainAnalysis};
use crate::envs::{random_ergodic_mdp, random_policy};
use crate::error::Result;
use crate::mdp::{TabularMdp, TabularPolicy};
use crate::msv::{
    msv_difference_terms, msv_directional_derivative, msv_policy_gradient_exact, risk_stats, DIFF_IDENTITY_TOL,
};
use crate::solvers::{msvtrpi_step, trust_region_bound_report, SolverConfig};
use crate::table::SaTable;

pub const DERIVATIVE_STEP: f64 = 1e-5;
pub const DERIVATIVE_REL_TOL: f64 = 1e-4;
pub const GRADIENT_STEP: f64 = 1e-5;
pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const POISSON_TOL: f64 = 1e-8;
pub const CENTERING_TOL: f64 = 1e-10;
pub const KEMENY_TOL: f64 = 1e-6;
/// Round-off allowance for the inequality checks.
pub const BOUND_SLACK: f64 = 1e-12;

/// Floor for relative errors so that vanishing quantities compare absolutely.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    /// Instance seed; rerunning the check with it reproduces the outcome.
    pub seed: u64,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn at_most(check: &str, seed: u64, value: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            seed,
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Largest number of states and of actions.
    pub max_size: usize,
    /// Added to every pseudo advantage in the identity check. Nonzero only
    /// to confirm that the check can fail.
    pub adv_offset: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            max_size: 6,
            adv_offset: 0.0,
        }
    }
}

/// A random MDP, two random policies and a `beta` in `[0, 5]`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mdp: TabularMdp,
    pub policy: TabularPolicy,
    pub other: TabularPolicy,
    pub beta: f64,
}

pub fn random_instance(seed: u64, max_size: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_s = rng.gen_range(2..=max_size.max(2));
    let n_a = rng.gen_range(2..=max_size.max(2));
    let scale = rng.gen_range(0.5..3.0);
    let beta = rng.gen_range(0.0..5.0);
    let mdp = random_ergodic_mdp(n_s, n_a, rng.gen(), scale);
    let policy = random_policy(n_s, n_a, rng.gen(), 1.5);
    let other = random_policy(n_s, n_a, rng.gen(), 1.5);
    Instance {
        mdp,
        policy,
        other,
        beta,
    }
}

fn xi_minus(mdp: &TabularMdp, policy: &TabularPolicy, beta: f64) -> Result<f64> {
    Ok(risk_stats(mdp, policy)?.xi_minus(beta))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// `|lhs - rhs|` of the exact difference identity.
pub fn check_identity(seed: u64, opts: &VerifyOptions) -> Result<CheckOutcome> {
    let inst = random_instance(seed, opts.max_size);
    let report = msv_difference_terms(&inst.mdp, &inst.policy, &inst.other, inst.beta, opts.adv_offset)?;
    Ok(CheckOutcome::at_most(
        "difference_identity",
        seed,
        report.gap(),
        DIFF_IDENTITY_TOL,
    ))
}

/// Directional derivative along the mixture towards `other` against a
/// central difference of `xi_-`.
pub fn check_directional_derivative(seed: u64, opts: &VerifyOptions) -> Result<CheckOutcome> {
    let inst = random_instance(seed, opts.max_size);
    let exact = msv_directional_derivative(&inst.mdp, &inst.policy, &inst.other, inst.beta)?;
    let h = DERIVATIVE_STEP;
    let along = |nu: f64| -> Result<f64> {
        let probs = SaTable::from_fn(inst.policy.n_states(), inst.policy.n_actions(), |s, a| {
            (1.0 - nu) * inst.policy.prob(s, a) + nu * inst.other.prob(s, a)
        });
        xi_minus(&inst.mdp, &TabularPolicy::from_probs(&probs)?, inst.beta)
    };
    let fd = (along(h)? - along(-h)?) / (2.0 * h);
    Ok(CheckOutcome::at_most(
        "directional_derivative",
        seed,
        rel_err(exact, fd),
        DERIVATIVE_REL_TOL,
    ))
}

/// Exact logit gradient against central differences, in the max norm.
pub fn check_policy_gradient(seed: u64, opts: &VerifyOptions) -> Result<CheckOutcome> {
    let inst = random_instance(seed, opts.max_size);
    let exact = msv_policy_gradient_exact(&inst.mdp, &inst.policy, inst.beta)?;
    let h = GRADIENT_STEP;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = REL_FLOOR;
    for i in 0..exact.as_slice().len() {
        let shifted = |d: f64| -> Result<f64> {
            let mut logits = inst.policy.logits().clone();
            logits.as_mut_slice()[i] += d;
            xi_minus(&inst.mdp, &TabularPolicy::from_logits(logits), inst.beta)
        };
        let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        worst = worst.max((fd - exact.as_slice()[i]).abs());
        scale = scale.max(fd.abs());
    }
    Ok(CheckOutcome::at_most(
        "policy_gradient",
        seed,
        worst / scale,
        GRADIENT_REL_TOL,
    ))
}

/// Takes a few trust-region steps at several radii and checks the
/// improvement lower bound and the state-action distribution bound for
/// each of them; `eps_mu` comes from the realized stationary-weighted KL.
pub fn check_trust_region_bound(seed: u64, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let inst = random_instance(seed, opts.max_size);
    let mut out = Vec::new();
    let (mut worst_improvement, mut worst_rho) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for eps_mu in [0.01, 0.05, 0.2] {
        let config = SolverConfig {
            eps_mu,
            ..SolverConfig::with_beta(inst.beta)
        };
        let mut policy = inst.policy.clone();
        for _ in 0..3 {
            let (next, _) = msvtrpi_step(&inst.mdp, &policy, &config)?;
            let report = trust_region_bound_report(&inst.mdp, &policy, &next, inst.beta)?;
            worst_improvement = worst_improvement.max(report.lower_bound - report.improvement);
            worst_rho = worst_rho.max(report.rho_l1 - report.rho_bound);
            policy = next;
        }
    }
    out.push(CheckOutcome::at_most(
        "improvement_bound",
        seed,
        worst_improvement,
        BOUND_SLACK,
    ));
    out.push(CheckOutcome::at_most(
        "distribution_bound",
        seed,
        worst_rho,
        BOUND_SLACK,
    ));
    Ok(out)
}

/// Poisson residual and advantage centering of the reward, and trace of the
/// fundamental matrix against first-passage times.
pub fn check_chain(seed: u64, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let inst = random_instance(seed, opts.max_size);
    let analysis = ChainAnalysis::new(&inst.mdp, &inst.policy)?;
    let values = analysis.differential_values(&inst.mdp, &inst.policy, inst.mdp.reward())?;
    let poisson = poisson_residual(&analysis, &inst.policy, inst.mdp.reward(), &values);
    let centering = inst
        .policy
        .expect(&values.adv)
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let m = mean_first_passage_times(analysis.p_mu.as_ref())?;
    let n = analysis.pi.len();
    let kemeny_gap = (0..n)
        .map(|i| {
            let k: f64 = 1.0 + (0..n).map(|j| analysis.pi[j] * m[(i, j)]).sum::<f64>();
            (k - analysis.kemeny()).abs()
        })
        .fold(0.0f64, f64::max);
    Ok(vec![
        CheckOutcome::at_most("poisson_residual", seed, poisson, POISSON_TOL),
        CheckOutcome::at_most("advantage_centering", seed, centering, CENTERING_TOL),
        CheckOutcome::at_most("kemeny_first_passage", seed, kemeny_gap, KEMENY_TOL),
    ])
}

/// Instance seed of the `i`-th instance of a suite run.
pub fn instance_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub outcomes: Vec<CheckOutcome>,
    /// Checks that raised an error, with their instance seed.
    pub errors: Vec<(String, u64, String)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    /// Largest observed value per check name, in first-seen order.
    pub fn worst_by_check(&self) -> Vec<(String, f64, f64, usize)> {
        let mut rows: Vec<(String, f64, f64, usize)> = Vec::new();
        for o in &self.outcomes {
            match rows.iter_mut().find(|r| r.0 == o.check) {
                Some(r) => {
                    r.1 = r.1.max(o.value);
                    r.3 += usize::from(!o.passed);
                }
                None => rows.push((o.check.clone(), o.value, o.tolerance, usize::from(!o.passed))),
            }
        }
        rows
    }
}

/// Every check on `n_instances` instances derived from `seed`.
pub fn verify_suite(seed: u64, n_instances: usize, opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    for i in 0..n_instances {
        let s = instance_seed(seed, i);
        let mut record = |name: &str, r: Result<Vec<CheckOutcome>>| match r {
            Ok(o) => report.outcomes.extend(o),
            Err(e) => report.errors.push((name.into(), s, e.to_string())),
        };
        record("difference_identity", check_identity(s, opts).map(|o| vec![o]));
        record(
            "directional_derivative",
            check_directional_derivative(s, opts).map(|o| vec![o]),
        );
        record("policy_gradient", check_policy_gradient(s, opts).map(|o| vec![o]));
        record("trust_region_bound", check_trust_region_bound(s, opts));
        record("chain", check_chain(s, opts));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible() {
        let a = random_instance(5, 6);
        let b = random_instance(5, 6);
        assert_eq!(a.mdp, b.mdp);
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.beta, b.beta);
    }

    #[test]
    fn injected_advantage_error_is_caught() {
        let opts = VerifyOptions {
            adv_offset: 1e-3,
            ..Default::default()
        };
        let o = check_identity(1, &opts).unwrap();
        assert!(!o.passed && o.value > 1e-4);
        assert!(check_identity(1, &VerifyOptions::default()).unwrap().passed);
    }
}
