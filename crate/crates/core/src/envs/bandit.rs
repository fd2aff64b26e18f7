//! Three-armed risky bandit: a mean-zero shifted log-normal arm, a
//! symmetric normal arm, and a high-mean high-variance normal arm.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MsvError, Result};
use crate::mdp::TabularMdp;
use crate::table::SaTable;

/// Absolute tolerance of the semivariance quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArmDistribution {
    /// `exp(mu + sigma z) - exp(mu + sigma^2 / 2)`, mean zero.
    ShiftedLogNormal {
        mu: f64,
        sigma: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
}

impl ArmDistribution {
    fn lognormal_mean(mu: f64, sigma: f64) -> f64 {
        (mu + 0.5 * sigma * sigma).exp()
    }

    /// Value at standard-normal score `z` (the distribution is a monotone
    /// transform of one normal draw).
    fn at_score(&self, z: f64) -> f64 {
        match *self {
            Self::ShiftedLogNormal { mu, sigma } => (mu + sigma * z).exp() - Self::lognormal_mean(mu, sigma),
            Self::Normal { mean, std } => mean + std * z,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.at_score(z)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::ShiftedLogNormal { .. } => 0.0,
            Self::Normal { mean, .. } => mean,
        }
    }
}

/// Per-arm reward distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditSpec {
    pub arms: Vec<ArmDistribution>,
}

impl Default for BanditSpec {
    fn default() -> Self {
        Self {
            arms: vec![
                ArmDistribution::ShiftedLogNormal { mu: 0.0, sigma: 1.0 },
                ArmDistribution::Normal { mean: 0.0, std: 2.0 },
                ArmDistribution::Normal { mean: 1.0, std: 3.0 },
            ],
        }
    }
}

impl BanditSpec {
    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn arm(&self, arm: usize) -> Result<&ArmDistribution> {
        self.arms
            .get(arm)
            .ok_or_else(|| MsvError::Range(format!("arm {arm} outside 0..{}", self.arms.len())))
    }
}

/// One reward draw from `arm`.
pub fn bandit_sample<R: Rng + ?Sized>(spec: &BanditSpec, arm: usize, rng: &mut R) -> Result<f64> {
    Ok(spec.arm(arm)?.sample(rng))
}

/// Exact mean, variance and downside semivariance of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub eta: f64,
    pub zeta: f64,
    pub zeta_minus: f64,
}

impl ArmStats {
    pub fn xi_minus(&self, beta: f64) -> f64 {
        self.eta - beta * self.zeta_minus
    }

    pub fn xi(&self, beta: f64) -> f64 {
        self.eta - beta * self.zeta
    }
}

/// Closed forms for normal arms; the log-normal semivariance
/// `int_0^m (x - m)^2 p(x) dx` is integrated numerically.
pub fn bandit_exact_stats(spec: &BanditSpec, arm: usize) -> Result<ArmStats> {
    match *spec.arm(arm)? {
        ArmDistribution::Normal { mean, std } => Ok(ArmStats {
            eta: mean,
            zeta: std * std,
            zeta_minus: 0.5 * std * std,
        }),
        ArmDistribution::ShiftedLogNormal { mu, sigma } => {
            let s2 = sigma * sigma;
            let m = ArmDistribution::lognormal_mean(mu, sigma);
            let zeta = (s2.exp() - 1.0) * (2.0 * mu + s2).exp();
            let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let integrand = |x: f64| {
                if x <= 0.0 {
                    return 0.0;
                }
                let l = (x.ln() - mu) / sigma;
                let d = x - m;
                d * d * norm * (-0.5 * l * l).exp() / x
            };
            let out = quadrature::double_exponential::integrate(integrand, 0.0, m, QUADRATURE_TOL);
            if !(out.error_estimate <= QUADRATURE_TOL) || !out.integral.is_finite() {
                return Err(MsvError::Precision(format!(
                    "log-normal semivariance quadrature error estimate {:e} exceeds {QUADRATURE_TOL:e}",
                    out.error_estimate
                )));
            }
            Ok(ArmStats {
                eta: 0.0,
                zeta,
                zeta_minus: out.integral,
            })
        }
    }
}

/// Discretizes the bandit onto `n_quantiles` equiprobable outcomes per arm.
///
/// State `k * n + j` records that the last pull was arm `k` with outcome
/// `j`; its reward (for every action) is that outcome's quantile midpoint,
/// and pulling arm `a` moves uniformly to one of arm `a`'s outcome states.
/// Every state is a decision point, and under an arm-stationary policy the
/// steady reward distribution is the mixture of the discretized arms.
pub fn bandit_as_mdp(spec: &BanditSpec, n_quantiles: usize) -> Result<TabularMdp> {
    if n_quantiles < 2 {
        return Err(MsvError::InvalidParameter(format!(
            "n_quantiles must be >= 2, got {n_quantiles}"
        )));
    }
    let n = n_quantiles;
    let n_arms = spec.n_arms();
    let n_states = n_arms * n;
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    // mirrored scores keep symmetric arms exactly symmetric
    let mut scores = vec![0.0; n];
    for j in 0..n / 2 {
        let z = std_normal.inverse_cdf((j as f64 + 0.5) / n as f64);
        scores[j] = z;
        scores[n - 1 - j] = -z;
    }
    let p = 1.0 / n as f64;
    let mut transitions = Vec::with_capacity(n_states * n_arms);
    let mut reward = SaTable::zeros(n_states, n_arms);
    for s in 0..n_states {
        let value = spec.arms[s / n].at_score(scores[s % n]);
        for a in 0..n_arms {
            transitions.push((0..n).map(|j| (a * n + j, p)).collect());
            reward[(s, a)] = value;
        }
    }
    TabularMdp::new(n_states, n_arms, transitions, reward, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn invalid_arm_is_range_error() {
        let spec = BanditSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(bandit_sample(&spec, 3, &mut rng), Err(MsvError::Range(_))));
        assert!(bandit_exact_stats(&spec, 7).is_err());
    }

    #[test]
    fn normal_arms_halve_their_variance() {
        let spec = BanditSpec::default();
        let a1 = bandit_exact_stats(&spec, 1).unwrap();
        let a2 = bandit_exact_stats(&spec, 2).unwrap();
        assert_eq!((a1.eta, a1.zeta, a1.zeta_minus), (0.0, 4.0, 2.0));
        assert_eq!((a2.eta, a2.zeta, a2.zeta_minus), (1.0, 9.0, 4.5));
        assert_eq!(a2.xi_minus(1.0), -3.5);
    }

    #[test]
    fn lognormal_samples_bounded_below() {
        let spec = BanditSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let floor = -(0.5f64).exp();
        for _ in 0..10_000 {
            assert!(bandit_sample(&spec, 0, &mut rng).unwrap() > floor);
        }
    }

    #[test]
    fn too_few_quantiles_rejected() {
        assert!(bandit_as_mdp(&BanditSpec::default(), 1).is_err());
    }
}
