//! Two risky assets plus cash with discrete Markov gains and proportional
//! transaction costs.
//!
//! A state is `(x1, x2, held weights)`; an action is the next weight pair
//! `(w1, w2)` on the grid `{0, 0.2, ..., 1}` with `w1 + w2 <= 1` (cash holds
//! the rest). The gains move independently according to two 8x8 matrices,
//! and the successor state always stores the chosen weights.

use serde::{Deserialize, Serialize};

use crate::error::{MsvError, Result};
use crate::mdp::TabularMdp;
use crate::table::SaTable;

/// Gain levels shared by both assets.
pub const GAIN_LEVELS: [f64; 8] = [-0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

#[rustfmt::skip]
pub const ASSET1_TRANSITIONS: [[f64; 8]; 8] = [
    [0.09, 0.05, 0.25, 0.24, 0.18, 0.05, 0.10, 0.04],
    [0.05, 0.02, 0.33, 0.22, 0.17, 0.09, 0.06, 0.06],
    [0.04, 0.03, 0.26, 0.24, 0.18, 0.07, 0.12, 0.06],
    [0.04, 0.04, 0.20, 0.28, 0.26, 0.08, 0.03, 0.07],
    [0.00, 0.02, 0.16, 0.24, 0.27, 0.11, 0.15, 0.05],
    [0.07, 0.02, 0.16, 0.19, 0.25, 0.14, 0.12, 0.05],
    [0.02, 0.04, 0.14, 0.19, 0.18, 0.20, 0.17, 0.06],
    [0.03, 0.03, 0.09, 0.19, 0.23, 0.15, 0.14, 0.14],
];

#[rustfmt::skip]
pub const ASSET2_TRANSITIONS: [[f64; 8]; 8] = [
    [0.13, 0.10, 0.08, 0.09, 0.20, 0.36, 0.02, 0.02],
    [0.06, 0.11, 0.09, 0.12, 0.17, 0.37, 0.04, 0.04],
    [0.01, 0.06, 0.12, 0.15, 0.25, 0.35, 0.02, 0.04],
    [0.06, 0.06, 0.12, 0.15, 0.22, 0.34, 0.01, 0.04],
    [0.02, 0.04, 0.09, 0.24, 0.23, 0.32, 0.04, 0.02],
    [0.04, 0.07, 0.11, 0.20, 0.26, 0.27, 0.03, 0.02],
    [0.10, 0.11, 0.13, 0.16, 0.17, 0.20, 0.04, 0.09],
    [0.01, 0.10, 0.30, 0.21, 0.16, 0.16, 0.00, 0.06],
];

/// Which weights earn the gains stored in a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardTiming {
    /// The state's gains are the return of the weights held over the last
    /// period (the ones stored in the state); the action only pays the
    /// rebalancing cost.
    #[default]
    Held,
    /// The action's weights are applied to the state's gains directly.
    Rebalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PortfolioConfig {
    pub cash_return: f64,
    pub transaction_cost: f64,
    pub gains: Vec<f64>,
    /// Number of weight steps per unit (5 gives the grid `{0, 0.2, ..., 1}`).
    pub weight_steps: usize,
    pub asset1: Vec<Vec<f64>>,
    pub asset2: Vec<Vec<f64>>,
    pub reward_timing: RewardTiming,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        Self {
            cash_return: 0.01,
            transaction_cost: 0.05,
            gains: GAIN_LEVELS.to_vec(),
            weight_steps: 5,
            asset1: ASSET1_TRANSITIONS.iter().map(|r| r.to_vec()).collect(),
            asset2: ASSET2_TRANSITIONS.iter().map(|r| r.to_vec()).collect(),
            reward_timing: RewardTiming::Held,
        }
    }
}

impl PortfolioConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.gains.len();
        if n == 0 || self.weight_steps == 0 {
            return Err(MsvError::InvalidModel("empty gain or weight grid".into()));
        }
        for (name, table) in [("asset1", &self.asset1), ("asset2", &self.asset2)] {
            if table.len() != n {
                return Err(MsvError::InvalidModel(format!(
                    "{name} has {} rows, expected {n}",
                    table.len()
                )));
            }
            for (i, row) in table.iter().enumerate() {
                if row.len() != n {
                    return Err(MsvError::InvalidModel(format!(
                        "{name} row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                if let Some(j) = row.iter().position(|&p| !(p >= 0.0)) {
                    return Err(MsvError::InvalidModel(format!(
                        "{name} cell ({i}, {j}) = {} is negative",
                        row[j]
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(MsvError::InvalidModel(format!("{name} row {i} sums to {sum}")));
                }
            }
        }
        Ok(())
    }

    /// Feasible `(w1, w2)` pairs in enumeration order; index 0 is all cash.
    pub fn weight_pairs(&self) -> Vec<(f64, f64)> {
        let k = self.weight_steps;
        let step = 1.0 / k as f64;
        let mut pairs = Vec::new();
        for i in 0..=k {
            for j in 0..=(k - i) {
                pairs.push((i as f64 * step, j as f64 * step));
            }
        }
        pairs
    }

    pub fn n_actions(&self) -> usize {
        let k = self.weight_steps + 1;
        k * (k + 1) / 2
    }

    pub fn n_states(&self) -> usize {
        self.gains.len() * self.gains.len() * self.n_actions()
    }
}

/// Decoded portfolio state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortfolioState {
    pub gain1: usize,
    pub gain2: usize,
    pub weights: usize,
}

pub fn encode_state(config: &PortfolioConfig, st: PortfolioState) -> usize {
    (st.gain1 * config.gains.len() + st.gain2) * config.n_actions() + st.weights
}

pub fn decode_state(config: &PortfolioConfig, s: usize) -> PortfolioState {
    let a = config.n_actions();
    let n = config.gains.len();
    PortfolioState {
        gain1: s / (n * a),
        gain2: (s / a) % n,
        weights: s % a,
    }
}

pub fn portfolio_mdp(config: &PortfolioConfig) -> Result<TabularMdp> {
    config.validate()?;
    let n = config.gains.len();
    let pairs = config.weight_pairs();
    let n_actions = pairs.len();
    let n_states = config.n_states();
    let x0 = config.cash_return;
    let c = config.transaction_cost;

    let mut transitions = Vec::with_capacity(n_states * n_actions);
    let mut reward = SaTable::zeros(n_states, n_actions);
    for s in 0..n_states {
        let st = decode_state(config, s);
        let (x1, x2) = (config.gains[st.gain1], config.gains[st.gain2]);
        let (h1, h2) = pairs[st.weights];
        for (a, &(w1, w2)) in pairs.iter().enumerate() {
            let cost = c * ((w1 - h1).abs() + (w2 - h2).abs());
            let (e1, e2) = match config.reward_timing {
                RewardTiming::Held => (h1, h2),
                RewardTiming::Rebalanced => (w1, w2),
            };
            reward[(s, a)] = (1.0 - e1 - e2) * x0 + e1 * x1 + e2 * x2 - cost;

            let mut row = Vec::with_capacity(n * n);
            for (i, &p1) in config.asset1[st.gain1].iter().enumerate() {
                for (j, &p2) in config.asset2[st.gain2].iter().enumerate() {
                    let p = p1 * p2;
                    if p > 0.0 {
                        let next = PortfolioState {
                            gain1: i,
                            gain2: j,
                            weights: a,
                        };
                        row.push((encode_state(config, next), p));
                    }
                }
            }
            // products of rows summing to 1 can drift by a few ulps
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            row.iter_mut().for_each(|(_, p)| *p /= total);
            transitions.push(row);
        }
    }
    TabularMdp::new(n_states, n_actions, transitions, reward, None)
}
