use std::path::Path;

use msv_cli::config::{AlgoKind, ExperimentConfig, PgConfig};
use msv_cli::env::EnvSpec;
use msv_cli::runner::{cell_name, read_frontier, run_experiment};
use msv_cli::tools::{evaluate_policy, reward_histogram, run_verify, HistogramBin};
use msv_core::envs::figure1::{figure1_mdp, pure_policy, LEFT, RIGHT};
use msv_core::io::{load_policy, read_csv, save_mdp, save_policy};
use msv_core::msv::risk_stats;
use msv_core::solvers::TraceRecord;
use msv_core::{SaTable, TabularMdp, TabularPolicy};

fn figure1_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::Figure1,
        algorithms: vec![AlgoKind::Msvtrpi],
        beta_grid: vec![1.0],
        seeds: vec![0],
        out_dir: out.to_path_buf(),
        threads: Some(2),
        ..Default::default()
    }
}

#[test]
fn single_figure1_cell_finds_the_right_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = figure1_config(dir.path());
    let outcome = run_experiment(&cfg).unwrap();
    assert!(outcome.succeeded());
    assert_eq!(outcome.rows.len(), 1);
    let row = &outcome.rows[0];
    assert!((row.xi_minus + 2.0 / 3.0).abs() < 1e-8, "xi_- = {}", row.xi_minus);
    assert!(row.converged);
    let policy = load_policy(
        dir.path()
            .join(format!("policy_{}.json", cell_name(AlgoKind::Msvtrpi, 1.0, 0))),
    )
    .unwrap();
    assert!(policy.prob(0, RIGHT) > 1.0 - 1e-9);
    for file in ["config.toml", "frontier.csv", "report.txt", "trace_msvtrpi_b1_s0.csv"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
}

#[test]
fn empty_seed_list_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let cfg = ExperimentConfig {
        seeds: vec![],
        ..figure1_config(&out)
    };
    let err = run_experiment(&cfg).unwrap_err();
    assert!(err.to_string().contains("seed"));
    assert!(!out.exists());
}

#[test]
fn written_tables_reload_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        env: EnvSpec::Random {
            n_states: 4,
            n_actions: 3,
            seed: 11,
            reward_scale: 2.0,
        },
        algorithms: vec![AlgoKind::Msvtrpi, AlgoKind::Mvpi, AlgoKind::Msvac],
        beta_grid: vec![0.0, 1.5],
        seeds: vec![1, 2],
        train_steps: 2000,
        hist_bins: 8,
        hist_steps: 500,
        ..figure1_config(dir.path())
    };
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.rows.len(), 12);
    // Debug prints shortest round-trip floats, so equal text means equal bits
    // (and NaN residuals of sample-based rows compare equal)
    let reloaded = read_frontier(&dir.path().join("frontier.csv")).unwrap();
    assert_eq!(format!("{reloaded:?}"), format!("{:?}", outcome.rows));

    let trace: Vec<TraceRecord> = read_csv(dir.path().join("trace_msvtrpi_b1.5_s2.csv")).unwrap();
    let last = trace.last().unwrap();
    assert!(last.xi_minus <= outcome.rows[3].xi_minus + 1e-12);
    let hist: Vec<HistogramBin> = read_csv(dir.path().join("hist_mvpi_b0_s1.csv")).unwrap();
    assert_eq!(hist.iter().map(|b| b.count).sum::<u64>(), 500);

    let echoed = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn failing_cells_are_reported_and_the_rest_still_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        algorithms: vec![AlgoKind::Msvtrpi, AlgoKind::Msvpg],
        beta_grid: vec![0.0, 1.0],
        seeds: vec![0, 1, 2],
        pg: PgConfig {
            learning_rate: -1.0,
            iterations: 10,
        },
        ..figure1_config(dir.path())
    };
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.rows.len() + outcome.failures.len(), 12);
    assert_eq!(outcome.failures.len(), 6);
    assert!(outcome.failures.iter().all(|f| f.algorithm == AlgoKind::Msvpg));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("rows: 6, failures: 6"));
    assert!(report.contains("learning rate"));
}

#[test]
fn normalized_mode_doubles_beta_for_semivariance_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        algorithms: vec![AlgoKind::Msvtrpi, AlgoKind::Mvpi],
        beta_grid: vec![0.25],
        normalized_msv: true,
        ..figure1_config(dir.path())
    };
    let rows = run_experiment(&cfg).unwrap().rows;
    assert_eq!((rows[0].algorithm, rows[0].solved_beta), (AlgoKind::Msvtrpi, 0.5));
    assert_eq!((rows[1].algorithm, rows[1].solved_beta), (AlgoKind::Mvpi, 0.25));
    assert_eq!(rows[0].xi_minus, rows[0].eta - 0.5 * rows[0].zeta_minus);
}

#[test]
fn evaluating_exported_files_matches_memory() {
    let dir = tempfile::tempdir().unwrap();
    let (mdp_path, pol_path) = (dir.path().join("f1.json"), dir.path().join("left.json"));
    let mdp = figure1_mdp();
    save_mdp(&mdp_path, &mdp).unwrap();
    save_policy(&pol_path, &pure_policy(LEFT)).unwrap();
    let stats = evaluate_policy(&mdp_path, &pol_path).unwrap();
    assert!(stats.eta.abs() < 1e-10);
    assert!((stats.zeta - 2.0).abs() < 1e-10);
    assert!((stats.zeta_minus - 4.0 / 3.0).abs() < 1e-10);
    assert_eq!(stats, risk_stats(&mdp, &pure_policy(LEFT)).unwrap());
}

#[test]
fn single_action_mdp_evaluates_like_risk_stats() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = TabularMdp::new(
        2,
        1,
        vec![vec![(0, 0.3), (1, 0.7)], vec![(0, 0.6), (1, 0.4)]],
        SaTable::from_vec(2, 1, vec![1.0, -0.5]).unwrap(),
        None,
    )
    .unwrap();
    let policy = TabularPolicy::uniform(2, 1);
    save_mdp(dir.path().join("m.json"), &mdp).unwrap();
    save_policy(dir.path().join("p.json"), &policy).unwrap();
    let stats = evaluate_policy(&dir.path().join("m.json"), &dir.path().join("p.json")).unwrap();
    assert_eq!(stats, risk_stats(&mdp, &policy).unwrap());
    // stationary (6/13, 7/13)
    assert!((stats.eta - (6.0 - 3.5) / 13.0).abs() < 1e-12);
}

#[test]
fn mismatched_policy_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_mdp(dir.path().join("m.json"), &figure1_mdp()).unwrap();
    save_policy(dir.path().join("p.json"), &TabularPolicy::uniform(3, 2)).unwrap();
    assert!(evaluate_policy(&dir.path().join("m.json"), &dir.path().join("p.json")).is_err());
}

#[test]
fn left_path_histogram_has_the_steady_masses() {
    let mdp = figure1_mdp();
    let hist = reward_histogram(&mdp, &pure_policy(LEFT), 3_000_000, 5, 3, 100, 0).unwrap();
    let total: u64 = hist.iter().map(|b| b.count).sum();
    assert_eq!(total, 3_000_000);
    let low = hist[0].count as f64 / total as f64;
    let high = hist[2].count as f64 / total as f64;
    assert_eq!((hist[0].bin_left, hist[2].bin_right), (-2.0, 1.0));
    assert!((low - 1.0 / 3.0).abs() < 0.01 / 3.0);
    assert!((high - 2.0 / 3.0).abs() < 0.02 / 3.0);
    assert_eq!(hist[1].count, 0);
}

#[test]
fn constant_reward_chain_gives_one_bin() {
    let mdp = TabularMdp::new(
        2,
        1,
        vec![vec![(1, 1.0)], vec![(0, 1.0)]],
        SaTable::from_vec(2, 1, vec![0.7, 0.7]).unwrap(),
        None,
    )
    .unwrap();
    let hist = reward_histogram(&mdp, &TabularPolicy::uniform(2, 1), 1000, 0, 10, 0, 0).unwrap();
    assert_eq!(
        hist,
        vec![HistogramBin {
            bin_left: 0.7,
            bin_right: 0.7,
            count: 1000
        }]
    );
}

#[test]
fn verify_runs_are_reproducible_and_the_canary_fails() {
    let a = run_verify(42, 1, false).unwrap();
    let b = run_verify(42, 1, false).unwrap();
    assert_eq!(a, b);
    assert!(a.passed());
    let canary = run_verify(42, 1, true).unwrap();
    assert!(!canary.passed());
    assert!(canary.failures().all(|o| o.check == "difference_identity"));
    assert!(run_verify(0, 0, false).is_err());
}

#[test]
fn portfolio_sweep_trades_return_for_risk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        env: EnvSpec::default(),
        algorithms: vec![AlgoKind::Msvtrpi],
        beta_grid: vec![0.0, 2.0, 10.0],
        threads: None,
        ..figure1_config(dir.path())
    };
    let rows = run_experiment(&cfg).unwrap().rows;
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.converged));
    for w in rows.windows(2) {
        assert!(w[1].eta <= w[0].eta + 1e-12, "{} then {}", w[0].eta, w[1].eta);
        assert!(w[1].zeta_minus <= w[0].zeta_minus + 1e-12);
    }
}

/// Share of the histogram's squared dispersion that lies below `eta`.
fn downside_share(bins: &[HistogramBin], eta: f64) -> f64 {
    let (mut below, mut total) = (0.0, 0.0);
    for b in bins {
        let d = 0.5 * (b.bin_left + b.bin_right) - eta;
        let w = d * d * b.count as f64;
        total += w;
        if d < 0.0 {
            below += w;
        }
    }
    below / total
}

#[test]
fn semivariance_policy_has_the_lighter_lower_tail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        env: EnvSpec::default(),
        algorithms: vec![AlgoKind::Msvtrpi, AlgoKind::Mvpi],
        beta_grid: vec![10.0],
        hist_bins: 200,
        hist_steps: 1_000_000,
        ..figure1_config(dir.path())
    };
    let rows = run_experiment(&cfg).unwrap().rows;
    let share = |algo: AlgoKind| {
        let row = rows.iter().find(|r| r.algorithm == algo).unwrap();
        let bins: Vec<HistogramBin> =
            read_csv(dir.path().join(format!("hist_{}.csv", cell_name(algo, 10.0, 0)))).unwrap();
        let share = downside_share(&bins, row.eta);
        // binning error on the exact ratio stays small at 200 bins
        assert!((share - row.zeta_minus / row.zeta).abs() < 0.02, "{algo}: {share}");
        share
    };
    let (msv, mv) = (share(AlgoKind::Msvtrpi), share(AlgoKind::Mvpi));
    assert!(msv < mv, "MSV {msv} vs MV {mv}");
}
