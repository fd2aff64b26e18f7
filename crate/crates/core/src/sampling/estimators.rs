use serde::{Deserialize, Serialize};

use crate::msv::{neg_part, surrogate_g_value};

use super::rollout::Batch;

/// Exponentially mixed estimates of the steady reward moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub eta_hat: f64,
    pub eta_minus_hat: f64,
    pub zeta_minus_hat: f64,
    /// Variance estimate, only used by the mean-variance reward.
    pub zeta_hat: f64,
    pub alpha: f64,
}

impl RunningStats {
    pub fn new(alpha: f64) -> Self {
        Self {
            eta_hat: 0.0,
            eta_minus_hat: 0.0,
            zeta_minus_hat: 0.0,
            zeta_hat: 0.0,
            alpha,
        }
    }

    pub fn xi_minus_hat(&self, beta: f64) -> f64 {
        self.eta_hat - beta * self.zeta_minus_hat
    }
}

/// One mixing step from a batch: the mean first, then the semimean and
/// semivariance against the updated mean.
pub fn update_running_stats(stats: &RunningStats, batch: &Batch) -> RunningStats {
    let a = stats.alpha;
    let n = batch.len().max(1) as f64;
    let mean = batch.rewards().sum::<f64>() / n;
    let eta = (1.0 - a) * stats.eta_hat + a * mean;
    let (mut semi, mut semivar, mut var) = (0.0, 0.0, 0.0);
    for r in batch.rewards() {
        let d = r - eta;
        let dm = neg_part(d);
        semi += dm;
        semivar += dm * dm;
        var += d * d;
    }
    RunningStats {
        eta_hat: eta,
        eta_minus_hat: (1.0 - a) * stats.eta_minus_hat + a * semi / n,
        zeta_minus_hat: (1.0 - a) * stats.zeta_minus_hat + a * semivar / n,
        zeta_hat: (1.0 - a) * stats.zeta_hat + a * var / n,
        alpha: a,
    }
}

/// Which per-step reward drives the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// `g = (1 + 2 beta eta_-) r - beta (r - eta)_-^2`, accounting for the
    /// shift of the mean.
    #[default]
    Surrogate,
    /// `f = r - beta (r - eta)_-^2` with the mean frozen.
    Pseudo,
    /// `r - beta (r - eta)^2`.
    MeanVariance,
}

impl RewardKind {
    pub fn value(self, r: f64, stats: &RunningStats, beta: f64) -> f64 {
        match self {
            Self::Surrogate => surrogate_g_value(r, stats.eta_hat, stats.eta_minus_hat, beta),
            Self::Pseudo => {
                let d = neg_part(r - stats.eta_hat);
                r - beta * d * d
            }
            Self::MeanVariance => r - beta * (r - stats.eta_hat).powi(2),
        }
    }

    /// Estimated long-run average of the reward, used as the baseline.
    pub fn average(self, stats: &RunningStats, beta: f64) -> f64 {
        match self {
            Self::Surrogate => (1.0 + 2.0 * beta * stats.eta_minus_hat) * stats.eta_hat - beta * stats.zeta_minus_hat,
            Self::Pseudo => stats.eta_hat - beta * stats.zeta_minus_hat,
            Self::MeanVariance => stats.eta_hat - beta * stats.zeta_hat,
        }
    }
}

/// Per-step rewards of `kind` for a batch.
pub fn step_rewards(batch: &Batch, kind: RewardKind, stats: &RunningStats, beta: f64) -> Vec<f64> {
    batch.rewards().map(|r| kind.value(r, stats, beta)).collect()
}

/// Sign of the value terms in the TD residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaeSign {
    /// `delta = g - g_bar + V(s') - V(s)`.
    #[default]
    Standard,
    /// `delta = g - g_bar + V(s) - V(s')`, with the value difference
    /// reversed; kept for comparisons.
    Reversed,
}

/// Backward recursion `A_n = delta_n + lambda A_{n+1}`, truncated at the end
/// of the batch.
pub fn gae_advantages(
    batch: &Batch,
    values: &[f64],
    rewards: &[f64],
    average: f64,
    lambda: f64,
    sign: GaeSign,
) -> Vec<f64> {
    assert_eq!(rewards.len(), batch.len(), "one reward per transition");
    let mut adv = vec![0.0; batch.len()];
    let mut next = 0.0;
    for (n, t) in batch.transitions.iter().enumerate().rev() {
        let dv = values[t.next_state] - values[t.state];
        let delta = rewards[n] - average
            + match sign {
                GaeSign::Standard => dv,
                GaeSign::Reversed => -dv,
            };
        next = delta + lambda * next;
        adv[n] = next;
    }
    adv
}

/// Tabular differential value estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub lr: f64,
}

impl ValueTable {
    pub fn zeros(n_states: usize, lr: f64) -> Self {
        Self {
            values: vec![0.0; n_states],
            lr,
        }
    }

    /// `V_hat_n = V(s_n) + A_n`.
    pub fn targets(&self, batch: &Batch, advantages: &[f64]) -> Vec<f64> {
        batch
            .transitions
            .iter()
            .zip(advantages)
            .map(|(t, a)| self.values[t.state] + a)
            .collect()
    }

    /// One gradient step on `(1/2N) sum (V(s_n) - target_n)^2`; returns the
    /// loss before the step.
    pub fn fit(&mut self, batch: &Batch, targets: &[f64]) -> f64 {
        let n = batch.len().max(1) as f64;
        let mut grad = vec![0.0; self.values.len()];
        let mut loss = 0.0;
        for (t, &y) in batch.transitions.iter().zip(targets) {
            let d = self.values[t.state] - y;
            loss += d * d;
            grad[t.state] += d;
        }
        for (v, g) in self.values.iter_mut().zip(grad) {
            *v -= self.lr * g / n;
        }
        loss / (2.0 * n)
    }

    /// Average value constraint: pulls the visitation-weighted mean of `V`
    /// towards zero by the fraction `nu`.
    pub fn recenter(&mut self, batch: &Batch, nu: f64) {
        let n = batch.len().max(1) as f64;
        let mean = batch.transitions.iter().map(|t| self.values[t.state]).sum::<f64>() / n;
        self.values.iter_mut().for_each(|v| *v -= nu * mean);
    }
}

/// Regresses `V` towards `V + A` for one step; returns the loss.
pub fn value_loss_and_update(table: &mut ValueTable, batch: &Batch, advantages: &[f64]) -> f64 {
    let targets = table.targets(batch, advantages);
    table.fit(batch, &targets)
}
