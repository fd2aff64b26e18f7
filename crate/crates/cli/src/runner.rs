use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use msv_core::envs::random_policy;
use msv_core::io::{csv_to_string, policy_to_json, read_csv};
use msv_core::msv::risk_stats;
use msv_core::sampling::{evaluate_by_simulation, train, Algorithm, SamplingConfig};
use msv_core::solvers::{msvpg_ascent, msvtrpi, mvpi, SolverConfig, SolverOutput};
use msv_core::{RiskStats, TabularPolicy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgoKind, ExperimentConfig};
use crate::env::BuiltEnv;
use crate::tools::reward_histogram;

/// Offset separating evaluation rollouts from training rollouts.
const EVAL_SEED_OFFSET: u64 = 0x5eed_e7a1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    /// Grid value.
    pub beta: f64,
    /// Value handed to the algorithm (doubled under normalized MSV).
    pub solved_beta: f64,
    pub algorithm: AlgoKind,
    pub seed: u64,
    pub eta: f64,
    pub zeta: f64,
    pub zeta_minus: f64,
    /// `eta - solved_beta * zeta_minus`.
    pub xi_minus: f64,
    /// `max A_g` at `solved_beta` for exact solvers; `NaN` for sample-based
    /// runs.
    pub optimality_residual: f64,
    pub iterations: usize,
    /// Sample-based runs never report convergence; they stop on budget.
    pub converged: bool,
    pub stop: String,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub algorithm: AlgoKind,
    pub beta_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub row: FrontierRow,
    pub policy: TabularPolicy,
    /// Per-iteration (exact) or per-batch (sample-based) records as CSV.
    pub trace_csv: String,
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub beta: f64,
    pub algorithm: AlgoKind,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    /// In grid order: algorithm, then beta, then seed.
    pub rows: Vec<FrontierRow>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// File stem shared by the per-cell outputs.
pub fn cell_name(algo: AlgoKind, beta: f64, seed: u64) -> String {
    format!("{algo}_b{beta}_s{seed}")
}

/// Sampling settings for a cell: the experiment's, or the bandit preset when
/// the bandit is run with untouched defaults.
fn sampling_config(config: &ExperimentConfig, env: &BuiltEnv, beta: f64) -> SamplingConfig {
    if matches!(env, BuiltEnv::Bandit { .. }) && config.sampling == SamplingConfig::default() {
        SamplingConfig::for_bandit(beta, config.sampling.reward_kind)
    } else {
        SamplingConfig {
            beta,
            ..config.sampling.clone()
        }
    }
}

fn exact_row(algo: AlgoKind, beta: f64, solved_beta: f64, seed: u64, out: &SolverOutput) -> FrontierRow {
    FrontierRow {
        beta,
        solved_beta,
        algorithm: algo,
        seed,
        eta: out.stats.eta,
        zeta: out.stats.zeta,
        zeta_minus: out.stats.zeta_minus,
        xi_minus: out.stats.xi_minus(solved_beta),
        optimality_residual: out.optimality_residual,
        iterations: out.iterations(),
        converged: out.converged(),
        stop: serde_plain(&out.stop),
        wall_time: 0.0,
    }
}

fn serde_plain<T: Serialize>(value: &T) -> String {
    toml::Value::try_from(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Runs one `(algorithm, beta, seed)` cell.
pub fn run_cell(
    config: &ExperimentConfig,
    env: &BuiltEnv,
    algo: AlgoKind,
    beta: f64,
    seed: u64,
) -> anyhow::Result<CellOutput> {
    let start = Instant::now();
    let solved_beta = config.solved_beta(algo, beta);
    let mdp = env.mdp();
    let solver = SolverConfig {
        beta: solved_beta,
        init_seed: config.solver.init_seed.map(|base| base.wrapping_add(seed)),
        ..config.solver.clone()
    };
    let mut out = match algo {
        AlgoKind::Msvtrpi | AlgoKind::Mvpi | AlgoKind::Msvpg => {
            let result = match algo {
                AlgoKind::Msvtrpi => msvtrpi(mdp, &solver)?,
                AlgoKind::Mvpi => mvpi(mdp, &solver)?,
                _ => {
                    let init = match solver.init_seed {
                        Some(s) => random_policy(mdp.n_states(), mdp.n_actions(), s, 1.0),
                        None => TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()),
                    };
                    msvpg_ascent(mdp, &init, &solver, config.pg.learning_rate, config.pg.iterations)?
                }
            };
            CellOutput {
                row: exact_row(algo, beta, solved_beta, seed, &result),
                trace_csv: csv_to_string(&result.trace.records)?,
                policy: result.policy,
            }
        }
        AlgoKind::Msvac | AlgoKind::Msvpo => {
            let sampling = sampling_config(config, env, solved_beta);
            let algorithm = if algo == AlgoKind::Msvac {
                Algorithm::Msvac
            } else {
                Algorithm::Msvpo
            };
            let trained = train(env.sampler(), &sampling, algorithm, config.train_steps, seed)?;
            let policy = trained.agent.policy;
            let stats: RiskStats = if env.sampler_is_exact() {
                risk_stats(mdp, &policy)?
            } else {
                evaluate_by_simulation(
                    env.sampler(),
                    &policy,
                    config.eval_steps,
                    sampling.burn_in,
                    seed.wrapping_add(EVAL_SEED_OFFSET),
                    sampling.start_state,
                )?
            };
            CellOutput {
                row: FrontierRow {
                    beta,
                    solved_beta,
                    algorithm: algo,
                    seed,
                    eta: stats.eta,
                    zeta: stats.zeta,
                    zeta_minus: stats.zeta_minus,
                    xi_minus: stats.xi_minus(solved_beta),
                    optimality_residual: f64::NAN,
                    iterations: trained.history.len(),
                    converged: false,
                    stop: "budget".into(),
                    wall_time: 0.0,
                },
                trace_csv: csv_to_string(&trained.history)?,
                policy,
            }
        }
    };
    out.row.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Writes through a temporary file so that readers never see partial output.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn write_cell_artifacts(config: &ExperimentConfig, env: &BuiltEnv, cell: &CellOutput) -> anyhow::Result<()> {
    let row = &cell.row;
    let name = cell_name(row.algorithm, row.beta, row.seed);
    let dir = &config.out_dir;
    write_atomic(&dir.join(format!("trace_{name}.csv")), &cell.trace_csv)?;
    write_atomic(&dir.join(format!("policy_{name}.json")), &policy_to_json(&cell.policy))?;
    if config.hist_bins > 0 {
        let (sampler, start, burn_in) = if row.algorithm.is_sampling() {
            let s = sampling_config(config, env, row.solved_beta);
            (env.sampler(), s.start_state, s.burn_in)
        } else {
            (
                env.mdp() as &dyn msv_core::sampling::Environment,
                0,
                config.sampling.burn_in,
            )
        };
        let bins = reward_histogram(
            sampler,
            &cell.policy,
            config.hist_steps,
            row.seed.wrapping_add(EVAL_SEED_OFFSET),
            config.hist_bins,
            burn_in,
            start,
        )?;
        write_atomic(&dir.join(format!("hist_{name}.csv")), &csv_to_string(&bins)?)?;
    }
    Ok(())
}

/// Runs every cell of the grid on a worker pool and writes `config.toml`,
/// `frontier.csv`, per-cell traces, policies and histograms, and
/// `report.txt` into `config.out_dir`. A failing cell is recorded and the
/// remaining cells still run.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<ExperimentOutcome> {
    config.validate()?;
    let env = config.env.build()?;
    std::fs::create_dir_all(&config.out_dir).with_context(|| format!("creating {}", config.out_dir.display()))?;
    write_atomic(&config.out_dir.join("config.toml"), &config.to_toml())?;

    let cells: Vec<(AlgoKind, f64, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| {
            config
                .beta_grid
                .iter()
                .flat_map(move |&b| config.seeds.iter().map(move |&s| (a, b, s)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_threads())
        .build()?;
    let results: Vec<anyhow::Result<FrontierRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(algo, beta, seed)| {
                let cell = run_cell(config, &env, algo, beta, seed)?;
                write_cell_artifacts(config, &env, &cell)?;
                Ok(cell.row)
            })
            .collect()
    });

    let mut outcome = ExperimentOutcome::default();
    for (&(algorithm, beta, seed), result) in cells.iter().zip(results) {
        match result {
            Ok(row) => outcome.rows.push(row),
            Err(e) => outcome.failures.push(CellFailure {
                beta,
                algorithm,
                seed,
                error: format!("{e:#}"),
            }),
        }
    }
    write_atomic(&config.out_dir.join("frontier.csv"), &csv_to_string(&outcome.rows)?)?;
    write_atomic(&config.out_dir.join("report.txt"), &format_report(config, &outcome))?;
    Ok(outcome)
}

pub fn read_frontier(path: &Path) -> anyhow::Result<Vec<FrontierRow>> {
    read_csv(path).with_context(|| format!("reading {}", path.display()))
}

pub fn format_report(config: &ExperimentConfig, outcome: &ExperimentOutcome) -> String {
    let mut out = String::new();
    let n_cells = config.algorithms.len() * config.beta_grid.len() * config.seeds.len();
    let _ = writeln!(out, "environment: {}", config.env);
    let _ = writeln!(
        out,
        "cells: {n_cells} ({} algorithms x {} betas x {} seeds), rows: {}, failures: {}",
        config.algorithms.len(),
        config.beta_grid.len(),
        config.seeds.len(),
        outcome.rows.len(),
        outcome.failures.len()
    );
    if config.normalized_msv {
        let _ = writeln!(out, "normalized MSV: semivariance runs solve at 2 * beta");
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:9} {:>7} {:>5} {:>10} {:>10} {:>10} {:>11} {:>6} {:>10} {:>8}",
        "algorithm", "beta", "seed", "eta", "zeta", "zeta_-", "xi_-", "iters", "stop", "time[s]"
    );
    for r in &outcome.rows {
        let _ = writeln!(
            out,
            "{:9} {:>7} {:>5} {:>10.6} {:>10.6} {:>10.6} {:>11.6} {:>6} {:>10} {:>8.2}",
            r.algorithm.name(),
            r.beta,
            r.seed,
            r.eta,
            r.zeta,
            r.zeta_minus,
            r.xi_minus,
            r.iterations,
            r.stop,
            r.wall_time
        );
    }
    if !outcome.failures.is_empty() {
        let _ = writeln!(out, "\nfailed cells:");
        for f in &outcome.failures {
            let _ = writeln!(out, "  {} beta={} seed={}: {}", f.algorithm, f.beta, f.seed, f.error);
        }
    }
    out
}

/// Output directory default relative to the working directory.
pub fn default_out_dir() -> PathBuf {
    ExperimentConfig::default().out_dir
}
