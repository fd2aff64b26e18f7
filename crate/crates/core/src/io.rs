//! File formats: MDPs and policies as JSON documents, result tables as CSV.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{MsvError, Result};
use crate::mdp::{TabularMdp, TabularPolicy};
use crate::msv::RiskStats;
use crate::table::SaTable;

/// On-disk MDP: dense `S x A x S` transitions and an `S x A` reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &TabularMdp) -> Self {
        Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            transition: mdp.dense_transitions(),
            reward: mdp.reward().to_rows(),
            r_max: Some(mdp.r_max()),
        }
    }

    pub fn into_mdp(self) -> Result<TabularMdp> {
        if self.transition.len() != self.n_states {
            return Err(MsvError::Dimension(format!(
                "transition has {} state rows, n_states is {}",
                self.transition.len(),
                self.n_states
            )));
        }
        if self.reward.len() != self.n_states {
            return Err(MsvError::Dimension(format!(
                "reward has {} rows, n_states is {}",
                self.reward.len(),
                self.n_states
            )));
        }
        if let Some((s, row)) = self.reward.iter().enumerate().find(|(_, r)| r.len() != self.n_actions) {
            return Err(MsvError::Dimension(format!(
                "reward[{s}] has {} entries, n_actions is {}",
                row.len(),
                self.n_actions
            )));
        }
        if let Some((s, row)) = self
            .transition
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.n_actions)
        {
            return Err(MsvError::Dimension(format!(
                "transition[{s}] has {} actions, n_actions is {}",
                row.len(),
                self.n_actions
            )));
        }
        TabularMdp::from_dense(&self.transition, &self.reward, self.r_max)
    }
}

/// On-disk policy. Logits are written so that a reload is bit-exact;
/// probabilities are accepted on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<Vec<f64>>>,
}

impl PolicyFile {
    pub fn from_policy(policy: &TabularPolicy) -> Self {
        Self {
            logits: Some(policy.logits().to_rows()),
            probs: None,
        }
    }

    pub fn into_policy(self) -> Result<TabularPolicy> {
        match (self.logits, self.probs) {
            (Some(logits), None) => Ok(TabularPolicy::from_logits(SaTable::from_rows(&logits)?)),
            (None, Some(probs)) => TabularPolicy::from_probs(&SaTable::from_rows(&probs)?),
            _ => Err(MsvError::Parse(
                "policy file needs exactly one of `logits` or `probs`".into(),
            )),
        }
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| MsvError::Parse(format!("{origin}: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

pub fn mdp_to_json(mdp: &TabularMdp) -> String {
    to_json(&MdpFile::from_mdp(mdp))
}

pub fn mdp_from_json(text: &str) -> Result<TabularMdp> {
    parse_json::<MdpFile>(text, "mdp")?.into_mdp()
}

pub fn policy_to_json(policy: &TabularPolicy) -> String {
    to_json(&PolicyFile::from_policy(policy))
}

pub fn policy_from_json(text: &str) -> Result<TabularPolicy> {
    parse_json::<PolicyFile>(text, "policy")?.into_policy()
}

pub fn save_mdp(path: impl AsRef<Path>, mdp: &TabularMdp) -> Result<()> {
    Ok(fs::write(path, mdp_to_json(mdp))?)
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<TabularMdp> {
    let path = path.as_ref();
    parse_json::<MdpFile>(&fs::read_to_string(path)?, &path.display().to_string())?.into_mdp()
}

pub fn save_policy(path: impl AsRef<Path>, policy: &TabularPolicy) -> Result<()> {
    Ok(fs::write(path, policy_to_json(policy))?)
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<TabularPolicy> {
    let path = path.as_ref();
    parse_json::<PolicyFile>(&fs::read_to_string(path)?, &path.display().to_string())?.into_policy()
}

/// Flat CSV record of [`RiskStats`] at a given `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub eta: f64,
    pub zeta: f64,
    pub zeta_minus: f64,
    pub eta_minus: f64,
    pub xi_minus: f64,
    pub beta: f64,
}

impl RiskRow {
    pub fn new(stats: &RiskStats, beta: f64) -> Self {
        Self {
            eta: stats.eta,
            zeta: stats.zeta,
            zeta_minus: stats.zeta_minus,
            eta_minus: stats.eta_minus,
            xi_minus: stats.xi_minus(beta),
            beta,
        }
    }

    pub fn stats(&self) -> RiskStats {
        RiskStats {
            eta: self.eta,
            zeta: self.zeta,
            zeta_minus: self.zeta_minus,
            eta_minus: self.eta_minus,
        }
    }
}

/// Writes `rows` with a header; floats use shortest round-trip formatting.
pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(MsvError::from)).collect()
}

pub fn csv_to_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| MsvError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn csv_from_str<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|row| row.map_err(MsvError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::figure1::{figure1_mdp, pure_policy, LEFT};
    use crate::envs::{random_ergodic_mdp, random_policy};
    use crate::msv::risk_stats;
    use crate::solvers::TraceRecord;

    #[test]
    fn mdp_and_policy_round_trip_bit_exactly() {
        let mdp = random_ergodic_mdp(5, 3, 11, 2.5);
        let pol = random_policy(5, 3, 12, 3.0);
        let mdp2 = mdp_from_json(&mdp_to_json(&mdp)).unwrap();
        let pol2 = policy_from_json(&policy_to_json(&pol)).unwrap();
        assert_eq!(mdp, mdp2);
        assert_eq!(pol, pol2);
        assert_eq!(risk_stats(&mdp, &pol).unwrap(), risk_stats(&mdp2, &pol2).unwrap());
    }

    #[test]
    fn figure1_export_evaluates_to_its_caption_values() {
        let mdp = mdp_from_json(&mdp_to_json(&figure1_mdp())).unwrap();
        let pol = policy_from_json(&policy_to_json(&pure_policy(LEFT))).unwrap();
        let s = risk_stats(&mdp, &pol).unwrap();
        assert!(s.eta.abs() < 1e-12 && (s.zeta - 2.0).abs() < 1e-10 && (s.zeta_minus - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn bad_row_is_named() {
        let text = r#"{"n_states": 2, "n_actions": 1,
            "transition": [[[0.5, 0.5]], [[0.7, 0.2]]],
            "reward": [[1.0], [0.0]]}"#;
        let err = mdp_from_json(text).unwrap_err().to_string();
        assert!(err.contains("s=1, a=0"), "{err}");
        let err = mdp_from_json(r#"{"n_states": 2, "n_actions": 1, "transition": [[[1.0, 0.0]]], "reward": [[1.0]]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("transition has 1 state rows"), "{err}");
        let err = mdp_from_json("{\n  \"n_states\": 2,\n  oops\n}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn probability_policies_load() {
        let pol = policy_from_json(r#"{"probs": [[0.25, 0.75]]}"#).unwrap();
        assert!((pol.prob(0, 1) - 0.75).abs() < 1e-15);
        assert!(policy_from_json(r#"{"probs": [[0.25, 0.5]]}"#).is_err());
        assert!(policy_from_json("{}").is_err());
    }

    #[test]
    fn csv_rows_round_trip_bit_exactly() {
        let rows: Vec<RiskRow> = (0..20)
            .map(|i| {
                let x = (i as f64 * 1.618).sin() / 3.0;
                RiskRow {
                    eta: x,
                    zeta: x * x,
                    zeta_minus: 1e-300 * x,
                    eta_minus: -x.abs(),
                    xi_minus: x - 0.1,
                    beta: i as f64 / 7.0,
                }
            })
            .collect();
        let back: Vec<RiskRow> = csv_from_str(&csv_to_string(&rows).unwrap()).unwrap();
        assert_eq!(rows, back);

        let trace = vec![TraceRecord {
            iter: 3,
            eta: 0.1,
            zeta: f64::NAN,
            zeta_minus: 1.0 / 3.0,
            xi_minus: -2.0 / 3.0,
            radius: 0.05,
            kl_step: 1e-17,
            dual_temperature: f64::INFINITY,
            optimality_residual: -1e-9,
            lower_bound_rhs: f64::NAN,
            accepted: true,
        }];
        let back: Vec<TraceRecord> = csv_from_str(&csv_to_string(&trace).unwrap()).unwrap();
        assert_eq!(back[0].iter, 3);
        assert!(back[0].zeta.is_nan() && back[0].dual_temperature == f64::INFINITY);
        assert_eq!(back[0].zeta_minus, 1.0 / 3.0);
        assert!(back[0].accepted);
    }
}
