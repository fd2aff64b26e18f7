use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use msv_cli::config::{AlgoKind, ExperimentConfig};
use msv_cli::env::EnvSpec;
use msv_cli::runner::{format_report, run_experiment, write_atomic};
use msv_cli::tools::{evaluate_policy, format_verify_report, reward_histogram, run_verify};
use msv_core::io::{csv_to_string, load_policy, save_mdp, RiskRow};
use msv_core::sampling::GaeSign;

#[derive(Parser)]
#[command(
    name = "semivar-rl",
    version,
    about = "Mean-semivariance policy optimization on tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an exact solver (msvtrpi, mvpi, msvpg) at one or more betas.
    Solve(RunArgs),
    /// Train a sample-based learner (msvac, msvpo).
    Sample(RunArgs),
    /// Full beta-grid sweep over every selected algorithm and seed.
    Sweep(RunArgs),
    /// Exact statistics of a saved policy on a saved MDP.
    Eval {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
    /// Histogram of simulated steady rewards of a saved policy.
    Hist {
        #[arg(long, default_value = "portfolio")]
        env: EnvSpec,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identity, derivative, bound and chain checks on random instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Inject an advantage error; the identity check must then fail.
        #[arg(long)]
        canary: bool,
    },
    /// Environment utilities.
    Env {
        #[command(subcommand)]
        action: EnvAction,
    },
}

#[derive(Subcommand)]
enum EnvAction {
    /// Save the tabular model of an environment as JSON.
    Export {
        #[arg(long)]
        env: EnvSpec,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvSpec>,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<AlgoKind>>,
    #[arg(long, conflicts_with = "beta_grid")]
    beta: Option<f64>,
    /// Comma-separated betas.
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    /// Comma-separated seeds; an explicit empty list is rejected.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    eps_mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    normalized_msv: bool,
    /// `standard` or `reversed`.
    #[arg(long, value_parser = parse_gae_sign)]
    gae_sign: Option<GaeSign>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    train_steps: Option<usize>,
    /// Histogram bins per cell (0 disables).
    #[arg(long)]
    hist_bins: Option<usize>,
}

fn parse_gae_sign(s: &str) -> Result<GaeSign, String> {
    match s {
        "standard" => Ok(GaeSign::Standard),
        "reversed" => Ok(GaeSign::Reversed),
        _ => Err(format!("expected `standard` or `reversed`, got `{s}`")),
    }
}

impl RunArgs {
    fn resolve(self, default_algos: &[AlgoKind]) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig {
                algorithms: default_algos.to_vec(),
                ..Default::default()
            },
        };
        if let Some(env) = self.env {
            cfg.env = env;
        }
        if let Some(algos) = self.algo {
            cfg.algorithms = algos;
        }
        if let Some(beta) = self.beta {
            cfg.beta_grid = vec![beta];
        }
        if let Some(grid) = self.beta_grid {
            cfg.beta_grid = grid;
        }
        if let Some(seeds) = self.seeds {
            cfg.seeds = seeds;
        }
        if let Some(eps) = self.eps_mu {
            cfg.solver.eps_mu = eps;
        }
        if let Some(alpha) = self.alpha {
            cfg.sampling.alpha = alpha;
        }
        if let Some(out) = self.out {
            cfg.out_dir = out;
        }
        if let Some(sign) = self.gae_sign {
            cfg.sampling.gae_sign = sign;
        }
        if let Some(steps) = self.train_steps {
            cfg.train_steps = steps;
        }
        if let Some(bins) = self.hist_bins {
            cfg.hist_bins = bins;
        }
        cfg.normalized_msv |= self.normalized_msv;
        cfg.threads = self.threads.or(cfg.threads);
        Ok(cfg)
    }
}

fn run(
    args: RunArgs,
    default_algos: &[AlgoKind],
    allowed: impl Fn(AlgoKind) -> bool,
    what: &str,
) -> anyhow::Result<bool> {
    let cfg = args.resolve(default_algos)?;
    if let Some(bad) = cfg.algorithms.iter().find(|a| !allowed(**a)) {
        bail!("`{bad}` is not {what}");
    }
    let outcome = run_experiment(&cfg)?;
    print!("{}", format_report(&cfg, &outcome));
    println!("outputs in {}", cfg.out_dir.display());
    Ok(outcome.succeeded())
}

fn dispatch(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Solve(args) => run(args, &[AlgoKind::Msvtrpi], |a| !a.is_sampling(), "an exact solver"),
        Command::Sample(args) => run(
            args,
            &[AlgoKind::Msvpo],
            AlgoKind::is_sampling,
            "a sample-based learner",
        ),
        Command::Sweep(args) => run(args, &[AlgoKind::Msvtrpi, AlgoKind::Mvpi], |_| true, "an algorithm"),
        Command::Eval { mdp, policy, beta } => {
            let stats = evaluate_policy(&mdp, &policy)?;
            print!("{}", csv_to_string(&[RiskRow::new(&stats, beta)])?);
            Ok(true)
        }
        Command::Hist {
            env,
            policy,
            steps,
            burn_in,
            bins,
            seed,
            out,
        } => {
            let built = env.build()?;
            let policy = load_policy(&policy).context("loading policy")?;
            let sampler = if built.sampler().n_states() == policy.n_states() {
                built.sampler()
            } else {
                built.mdp()
            };
            let hist = reward_histogram(sampler, &policy, steps, seed, bins, burn_in, 0)?;
            let text = csv_to_string(&hist)?;
            match out {
                Some(path) => write_atomic(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Verify {
            seed,
            instances,
            canary,
        } => {
            let report = run_verify(seed, instances, canary)?;
            print!("{}", format_verify_report(&report));
            Ok(report.passed())
        }
        Command::Env {
            action: EnvAction::Export { env, out },
        } => {
            save_mdp(&out, env.build()?.mdp()).with_context(|| format!("writing {}", out.display()))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
