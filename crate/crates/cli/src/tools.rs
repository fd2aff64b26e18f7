use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use msv_core::io::{load_mdp, load_policy};
use msv_core::msv::risk_stats;
use msv_core::sampling::{simulate, Environment};
use msv_core::verify::{verify_suite, VerifyOptions, VerifyReport};
use msv_core::{RiskStats, TabularPolicy};
use serde::{Deserialize, Serialize};

/// Exact steady statistics of a saved policy on a saved MDP.
pub fn evaluate_policy(mdp_file: &Path, policy_file: &Path) -> anyhow::Result<RiskStats> {
    let mdp = load_mdp(mdp_file).with_context(|| format!("loading MDP {}", mdp_file.display()))?;
    let policy = load_policy(policy_file).with_context(|| format!("loading policy {}", policy_file.display()))?;
    mdp.check_policy(&policy)
        .with_context(|| format!("{} does not fit {}", policy_file.display(), mdp_file.display()))?;
    Ok(risk_stats(&mdp, &policy)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

/// Equal-width histogram of the rewards of one run, after `burn_in` steps.
/// The last bin is closed on the right. A constant stream gives one
/// zero-width bin.
pub fn reward_histogram(
    env: &dyn Environment,
    policy: &TabularPolicy,
    n_steps: usize,
    seed: u64,
    n_bins: usize,
    burn_in: usize,
    start_state: usize,
) -> anyhow::Result<Vec<HistogramBin>> {
    if n_steps == 0 || n_bins == 0 {
        bail!("histogram needs at least one step and one bin");
    }
    let batch = simulate(env, policy, burn_in + n_steps, seed, start_state)?;
    let rewards: Vec<f64> = batch.rewards().skip(burn_in).collect();
    Ok(histogram(&rewards, n_bins))
}

pub fn histogram(values: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![HistogramBin {
            bin_left: lo,
            bin_right: hi,
            count: values.len() as u64,
        }];
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            bin_left: lo + k as f64 * width,
            bin_right: if k + 1 == n_bins {
                hi
            } else {
                lo + (k + 1) as f64 * width
            },
            count,
        })
        .collect()
}

/// Runs the verification suite; `canary` injects an advantage error so the
/// identity check must fail.
pub fn run_verify(seed: u64, n_instances: usize, canary: bool) -> anyhow::Result<VerifyReport> {
    if n_instances == 0 {
        bail!("verify needs at least one instance");
    }
    let opts = VerifyOptions {
        adv_offset: if canary { 1e-3 } else { 0.0 },
        ..Default::default()
    };
    Ok(verify_suite(seed, n_instances, &opts))
}

pub fn format_verify_report(report: &VerifyReport) -> String {
    let mut out = String::new();
    for (check, worst, tol, failed) in report.worst_by_check() {
        let status = if failed == 0 { "ok" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{status:4} {check:24} worst {worst:.3e} (tolerance {tol:.1e}), {failed} failed"
        );
    }
    for o in report.failures() {
        let _ = writeln!(
            out,
            "failed {} on instance seed {}: {:.3e} > {:.1e}",
            o.check, o.seed, o.value, o.tolerance
        );
    }
    for (check, seed, err) in &report.errors {
        let _ = writeln!(out, "error in {check} on instance seed {seed}: {err}");
    }
    let _ = writeln!(
        out,
        "{}",
        if report.passed() {
            "all checks passed"
        } else {
            "verification FAILED"
        }
    );
    out
}
