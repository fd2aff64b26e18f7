//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion, with
//! indented details, and exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use msv_cli::config::{AlgoKind, ExperimentConfig};
use msv_cli::env::EnvSpec;
use msv_cli::runner::{run_experiment, FrontierRow};
use msv_core::envs::bandit::{bandit_as_mdp, bandit_exact_stats, bandit_sample, BanditSpec};
use msv_core::envs::figure1::{figure1_mdp, pure_policy, LEFT, RIGHT};
use msv_core::envs::{portfolio_mdp, random_ergodic_mdp, random_policy, PortfolioConfig};
use msv_core::msv::{msv_policy_gradient_exact, risk_stats, surrogate_g, SurrogateEvaluation};
use msv_core::sampling::{
    evaluate_by_simulation, policy_gradient_estimate, simulate, train, Algorithm, BanditEnv, RewardKind, RunningStats,
    SamplingConfig,
};
use msv_core::solvers::{msvtrpi, SolverConfig, SolverOutput};
use msv_core::verify::{self, instance_seed, CheckOutcome, VerifyOptions, BOUND_SLACK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIGURE1_TOL: f64 = 1e-10;
const OPTIMALITY_TOL: f64 = 1e-4;
const SUITE_SEED: u64 = 2024;
const N_IDENTITY: usize = 100;
const N_DERIVATIVE: usize = 50;
const N_BOUND: usize = 100;
const N_CHAIN: usize = 100;
const MC_DRAWS: usize = 100_000_000;
const SE_BAND: f64 = 3.0;
const BANDIT_MASS: f64 = 0.9;
const BANDIT_SEEDS: u64 = 5;
const BANDIT_STEPS: usize = 20_000;
const PORTFOLIO_BETA: f64 = 10.0;
const MSV_ETA_BAND: (f64, f64) = (0.12, 0.20);
const MSV_ZETA_MINUS_BAND: (f64, f64) = (0.003, 0.010);
const MV_ETA_BAND: (f64, f64) = (0.05, 0.10);
const MV_ZETA_BAND: (f64, f64) = (0.001, 0.004);
const BETA_GRID: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
/// At `beta = 0` both methods maximize the average reward.
const RISK_NEUTRAL_TIE: f64 = 1e-10;
const UNBIASED_RUNS: usize = 10_000;
const MSVPO_BETAS: [f64; 3] = [0.0, 2.0, 10.0];
const MSVPO_SEEDS: [u64; 3] = [0, 1, 2];
const MSVPO_STEPS: usize = 1_000_000;
const MSVPO_EVAL_STEPS: usize = 100_000;

struct Check {
    ok: bool,
    what: String,
}

fn check(ok: bool, what: impl Into<String>) -> Check {
    Check { ok, what: what.into() }
}

struct Verdict {
    id: u8,
    title: &'static str,
    checks: Vec<Check>,
    elapsed: Duration,
    budget: Option<Duration>,
}

impl Verdict {
    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok) && self.budget.is_none_or(|b| self.elapsed <= b)
    }

    fn print(&self) {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let budget = self
            .budget
            .map_or(String::new(), |b| format!(", budget {} s", b.as_secs()));
        println!(
            "criterion {} {status}: {} ({:.1} s{budget})",
            self.id,
            self.title,
            self.elapsed.as_secs_f64()
        );
        for c in &self.checks {
            println!("    {} {}", if c.ok { "ok  " } else { "FAIL" }, c.what);
        }
    }
}

fn timed(id: u8, title: &'static str, budget: Option<u64>, f: impl FnOnce() -> Vec<Check>) -> Verdict {
    eprintln!("running criterion {id}: {title}");
    let start = Instant::now();
    let checks = f();
    Verdict {
        id,
        title,
        checks,
        elapsed: start.elapsed(),
        budget: budget.map(Duration::from_secs),
    }
}

/// Converged trust-region runs collected for the optimality criterion.
#[derive(Default)]
struct Converged {
    residuals: Vec<(String, f64)>,
}

impl Converged {
    fn record(&mut self, label: impl Into<String>, out: &SolverOutput) {
        if out.converged() {
            self.residuals.push((label.into(), out.optimality_residual));
        }
    }

    fn record_row(&mut self, row: &FrontierRow) {
        if row.algorithm == AlgoKind::Msvtrpi && row.converged {
            let label = format!("{} beta={}", row.algorithm, row.solved_beta);
            self.residuals.push((label, row.optimality_residual));
        }
    }
}

/// Summarizes a suite: passes iff every outcome passed and none errored.
fn suite_check(name: &str, outcomes: Vec<Result<Vec<CheckOutcome>, String>>) -> Check {
    let mut worst = f64::NEG_INFINITY;
    let mut tol = f64::NAN;
    let mut failed = Vec::new();
    let mut errors = Vec::new();
    let n = outcomes.len();
    for o in outcomes {
        match o {
            Ok(list) => {
                for c in list.into_iter().filter(|c| c.check == name) {
                    worst = worst.max(c.value);
                    tol = c.tolerance;
                    if !c.passed {
                        failed.push(c.seed);
                    }
                }
            }
            Err(e) => errors.push(e),
        }
    }
    check(
        failed.is_empty() && errors.is_empty(),
        format!("{name}: worst {worst:.3e} vs {tol:.0e} on {n} instances; failing seeds {failed:?}; errors {errors:?}"),
    )
}

fn run_instances(
    n: usize,
    f: impl Fn(u64) -> msv_core::Result<Vec<CheckOutcome>>,
) -> Vec<Result<Vec<CheckOutcome>, String>> {
    (0..n)
        .map(|i| f(instance_seed(SUITE_SEED, i)).map_err(|e| e.to_string()))
        .collect()
}

fn criterion1(conv: &mut Converged) -> Vec<Check> {
    let mdp = figure1_mdp();
    let mut checks = Vec::new();
    for (name, dir, zm) in [("left", LEFT, 4.0 / 3.0), ("right", RIGHT, 2.0 / 3.0)] {
        let s = risk_stats(&mdp, &pure_policy(dir)).unwrap();
        let ok = s.eta.abs() <= FIGURE1_TOL
            && (s.zeta - 2.0).abs() <= FIGURE1_TOL
            && (s.zeta_minus - zm).abs() <= FIGURE1_TOL;
        checks.push(check(
            ok,
            format!(
                "{name}: eta {:.3e}, zeta {:.12}, zeta_- {:.12} (want 0, 2, {zm:.12})",
                s.eta, s.zeta, s.zeta_minus
            ),
        ));
    }
    let out = msvtrpi(&mdp, &SolverConfig::with_beta(1.0)).unwrap();
    conv.record("figure1 beta=1", &out);
    let p_right = out.policy.prob(0, RIGHT);
    checks.push(check(
        out.converged() && p_right > 1.0 - 1e-6,
        format!(
            "MSVTRPI beta=1: stop {:?} after {} iterations, P(right) = {p_right:.9}",
            out.stop,
            out.iterations()
        ),
    ));
    checks
}

fn criterion2() -> Vec<Check> {
    let opts = VerifyOptions::default();
    let outcomes = run_instances(N_IDENTITY, |s| verify::check_identity(s, &opts).map(|o| vec![o]));
    vec![suite_check("difference_identity", outcomes)]
}

fn criterion3() -> Vec<Check> {
    let opts = VerifyOptions::default();
    let outcomes = run_instances(N_DERIVATIVE, |s| {
        Ok(vec![
            verify::check_directional_derivative(s, &opts)?,
            verify::check_policy_gradient(s, &opts)?,
        ])
    });
    vec![
        suite_check("directional_derivative", outcomes.clone()),
        suite_check("policy_gradient", outcomes),
    ]
}

/// Fixed-radius steps from the verification suite, plus every accepted
/// step of full adaptive runs on the same instances (improvement bound from
/// the solver trace).
fn criterion5(conv: &mut Converged) -> Vec<Check> {
    let opts = VerifyOptions::default();
    let outcomes = run_instances(N_BOUND, |s| verify::check_trust_region_bound(s, &opts));
    let mut checks = vec![
        suite_check("improvement_bound", outcomes.clone()),
        suite_check("distribution_bound", outcomes),
    ];
    let (mut steps, mut violations, mut worst) = (0usize, Vec::new(), f64::NEG_INFINITY);
    for i in 0..N_BOUND {
        let seed = instance_seed(SUITE_SEED, i);
        let inst = verify::random_instance(seed, opts.max_size);
        let out = match msvtrpi(&inst.mdp, &SolverConfig::with_beta(inst.beta)) {
            Ok(out) => out,
            Err(e) => {
                violations.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        conv.record(format!("random instance {seed}"), &out);
        let recs = &out.trace.records;
        for (k, rec) in recs.iter().enumerate().filter(|(_, r)| r.accepted) {
            let next_xi = recs.get(k + 1).map_or(out.stats.xi_minus(inst.beta), |r| r.xi_minus);
            let gap = rec.lower_bound_rhs - (next_xi - rec.xi_minus);
            worst = worst.max(gap);
            steps += 1;
            if gap > BOUND_SLACK {
                violations.push(format!("seed {seed} step {k}: gap {gap:.3e}"));
            }
        }
    }
    checks.push(check(
        violations.is_empty(),
        format!(
            "improvement bound on {steps} accepted steps of full runs: worst (bound - gain) {worst:.3e}; violations {violations:?}"
        ),
    ));
    checks
}

fn criterion6(conv: &mut Converged) -> Vec<Check> {
    let spec = BanditSpec::default();
    let stats: Vec<_> = (0..3).map(|a| bandit_exact_stats(&spec, a).unwrap()).collect();
    let argmax = |f: &dyn Fn(usize) -> f64| (0..3).max_by(|&a, &b| f(a).total_cmp(&f(b))).unwrap();
    let (msv, mv, mean) = (
        argmax(&|a| stats[a].xi_minus(1.0)),
        argmax(&|a| stats[a].xi(1.0)),
        argmax(&|a| stats[a].eta),
    );
    let mut checks = vec![check(
        (msv, mv, mean) == (0, 1, 2),
        format!("oracle argmax at beta=1: MSV arm {msv}, MV arm {mv}, mean arm {mean} (want 0, 1, 2)"),
    )];

    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let m = stats[0].eta;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..MC_DRAWS {
        let d = (bandit_sample(&spec, 0, &mut rng).unwrap() - m).min(0.0);
        let d2 = d * d;
        sum += d2;
        sum_sq += d2 * d2;
    }
    let n = MC_DRAWS as f64;
    let mc = sum / n;
    let se = ((sum_sq / n - mc * mc) / n).sqrt();
    checks.push(check(
        (mc - stats[0].zeta_minus).abs() <= SE_BAND * se,
        format!(
            "arm-0 zeta_-: quadrature {:.8}, Monte-Carlo {mc:.8} +- {se:.1e} ({} draws, {:.2} se)",
            stats[0].zeta_minus,
            MC_DRAWS,
            (mc - stats[0].zeta_minus).abs() / se
        ),
    ));

    let env = BanditEnv { spec: spec.clone() };
    for (kind, arm, label) in [(RewardKind::Surrogate, 0, "g"), (RewardKind::Pseudo, 2, "f")] {
        let config = SamplingConfig::for_bandit(1.0, kind);
        let masses: Vec<f64> = (0..BANDIT_SEEDS)
            .map(|seed| {
                train(&env, &config, Algorithm::Msvac, BANDIT_STEPS, seed)
                    .unwrap()
                    .agent
                    .policy
                    .prob(0, arm)
            })
            .collect();
        checks.push(check(
            masses.iter().all(|&p| p > BANDIT_MASS),
            format!("MSVAC driven by {label}: mass on arm {arm} per seed {masses:.4?} (want > {BANDIT_MASS})"),
        ));
    }

    let mdp = bandit_as_mdp(&spec, 40).unwrap();
    let out = msvtrpi(&mdp, &SolverConfig::with_beta(1.0)).unwrap();
    conv.record("discretized bandit beta=1", &out);
    checks
}

fn in_band(x: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&x)
}

fn portfolio_rows(algorithms: Vec<AlgoKind>, normalized: bool) -> Vec<FrontierRow> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        env: EnvSpec::Portfolio(PortfolioConfig::default()),
        algorithms,
        beta_grid: BETA_GRID.to_vec(),
        seeds: vec![0],
        normalized_msv: normalized,
        out_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let outcome = run_experiment(&cfg).unwrap();
    assert!(outcome.succeeded(), "portfolio cells failed: {:?}", outcome.failures);
    outcome.rows
}

fn criterion7(conv: &mut Converged) -> Vec<Check> {
    let rows = portfolio_rows(vec![AlgoKind::Msvtrpi, AlgoKind::Mvpi], false);
    let normalized = portfolio_rows(vec![AlgoKind::Msvtrpi], true);
    let find = |rows: &[FrontierRow], algo: AlgoKind, beta: f64| {
        rows.iter()
            .find(|r| r.algorithm == algo && r.beta == beta)
            .cloned()
            .unwrap()
    };
    rows.iter().chain(&normalized).for_each(|r| conv.record_row(r));

    let msv = find(&rows, AlgoKind::Msvtrpi, PORTFOLIO_BETA);
    let mv = find(&rows, AlgoKind::Mvpi, PORTFOLIO_BETA);
    let mut checks = vec![
        check(
            in_band(msv.eta, MSV_ETA_BAND) && in_band(msv.zeta_minus, MSV_ZETA_MINUS_BAND),
            format!(
                "MSVTRPI beta=10: eta {:.4} in {MSV_ETA_BAND:?}, zeta_- {:.5} in {MSV_ZETA_MINUS_BAND:?}",
                msv.eta, msv.zeta_minus
            ),
        ),
        check(
            in_band(mv.eta, MV_ETA_BAND) && in_band(mv.zeta, MV_ZETA_BAND),
            format!(
                "MVPI beta=10: eta {:.4} in {MV_ETA_BAND:?}, zeta {:.5} in {MV_ZETA_BAND:?}",
                mv.eta, mv.zeta
            ),
        ),
    ];
    for (label, msv_rows) in [("MSVTRPI(beta)", &rows), ("MSVTRPI(2 beta)", &normalized)] {
        let mut bad = Vec::new();
        let mut pairs = Vec::new();
        for &beta in &BETA_GRID {
            let a = find(msv_rows, AlgoKind::Msvtrpi, beta).eta;
            let b = find(&rows, AlgoKind::Mvpi, beta).eta;
            pairs.push(format!("{beta}: {a:.6}/{b:.6}"));
            let ok = if beta == 0.0 {
                (a - b).abs() <= RISK_NEUTRAL_TIE
            } else {
                a > b
            };
            if !ok {
                bad.push(beta);
            }
        }
        checks.push(check(
            bad.is_empty(),
            format!(
                "{label} eta vs MVPI eta (strict for beta > 0, tie at 0): {}; failing betas {bad:?}",
                pairs.join(", ")
            ),
        ));
    }
    checks
}

fn criterion8() -> Vec<Check> {
    let beta = 1.0;
    let mdp = random_ergodic_mdp(3, 2, 811, 1.0);
    let pol = random_policy(3, 2, 812, 1.0);
    let eval = SurrogateEvaluation::new(&mdp, &pol, beta).unwrap();
    let stats = RunningStats {
        eta_hat: eval.stats.eta,
        eta_minus_hat: eval.stats.eta_minus,
        zeta_minus_hat: eval.stats.zeta_minus,
        zeta_hat: eval.stats.zeta,
        alpha: 0.01,
    };
    let v = eval
        .analysis
        .differential_values(&mdp, &pol, &surrogate_g(&mdp, &eval.stats, beta))
        .unwrap()
        .v;
    let exact = msv_policy_gradient_exact(&mdp, &pol, beta).unwrap();
    let config = SamplingConfig {
        beta,
        ..Default::default()
    };
    let n_params = exact.as_slice().len();
    let mut sums = vec![(0.0, 0.0); n_params];
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    for seed in 0..UNBIASED_RUNS as u64 {
        // stationary start so that every step of the batch is stationary
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let start = eval.analysis.pi.iter().position(|p| {
            acc += p;
            u < acc
        });
        let start = start.unwrap_or(eval.analysis.pi.len() - 1);
        let batch = simulate(&mdp, &pol, 16, seed, start).unwrap();
        let (grad, _) = policy_gradient_estimate(&pol, &v, &stats, &batch, &config);
        for (s, &x) in sums.iter_mut().zip(grad.as_slice()) {
            s.0 += x;
            s.1 += x * x;
        }
    }
    let n = UNBIASED_RUNS as f64;
    let z: Vec<f64> = sums
        .iter()
        .zip(exact.as_slice())
        .map(|(&(s, s2), &target)| {
            let m = s / n;
            let se = ((s2 / n - m * m) / (n - 1.0)).sqrt();
            (m - target).abs() / se
        })
        .collect();
    let mut checks = vec![check(
        z.iter().all(|&x| x <= SE_BAND),
        format!("MSVAC gradient vs exact over {UNBIASED_RUNS} batches: |error| / se per component {z:.2?}"),
    )];

    let portfolio = portfolio_mdp(&PortfolioConfig::default()).unwrap();
    for seed in MSVPO_SEEDS {
        let zm: Vec<f64> = MSVPO_BETAS
            .iter()
            .map(|&beta| {
                let config = SamplingConfig {
                    beta,
                    ..Default::default()
                };
                let out = train(&portfolio, &config, Algorithm::Msvpo, MSVPO_STEPS, seed).unwrap();
                evaluate_by_simulation(
                    &portfolio,
                    &out.agent.policy,
                    MSVPO_EVAL_STEPS,
                    config.burn_in,
                    seed + 100,
                    0,
                )
                .unwrap()
                .zeta_minus
            })
            .collect();
        checks.push(check(
            zm.windows(2).all(|w| w[1] < w[0]),
            format!("MSVPO seed {seed}: evaluated zeta_- at beta {MSVPO_BETAS:?} = {zm:.5?}"),
        ));
    }
    checks
}

fn criterion9() -> Vec<Check> {
    let opts = VerifyOptions::default();
    let outcomes = run_instances(N_CHAIN, |s| verify::check_chain(s, &opts));
    ["poisson_residual", "advantage_centering", "kemeny_first_passage"]
        .into_iter()
        .map(|name| suite_check(name, outcomes.clone()))
        .collect()
}

fn criterion4(conv: &Converged) -> Vec<Check> {
    let worst = conv
        .residuals
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap_or_default();
    let bad: Vec<&String> = conv
        .residuals
        .iter()
        .filter(|r| r.1 > OPTIMALITY_TOL)
        .map(|r| &r.0)
        .collect();
    vec![check(
        !conv.residuals.is_empty() && bad.is_empty(),
        format!(
            "{} converged runs; worst max A_g {:.3e} ({}) vs {OPTIMALITY_TOL:.0e}; violations {bad:?}",
            conv.residuals.len(),
            worst.1,
            worst.0
        ),
    )]
}

fn main() {
    let mut conv = Converged::default();
    let mut verdicts = vec![
        timed(1, "figure-1 statistics and MSVTRPI on the toy", Some(1), || {
            criterion1(&mut conv)
        }),
        timed(2, "performance-difference identity", Some(30), criterion2),
        timed(3, "directional derivative and policy gradient", Some(60), criterion3),
        timed(5, "trust-region improvement and distribution bounds", None, || {
            criterion5(&mut conv)
        }),
        timed(6, "bandit preferences", Some(300), || criterion6(&mut conv)),
        timed(7, "portfolio reproduction and MSV-over-MV dominance", Some(600), || {
            criterion7(&mut conv)
        }),
        timed(8, "sample-based consistency", None, criterion8),
        timed(9, "chain-analysis suite", Some(30), criterion9),
    ];
    verdicts.push(timed(4, "optimality condition of converged MSVTRPI runs", None, || {
        criterion4(&conv)
    }));
    verdicts.sort_by_key(|v| v.id);

    println!();
    for v in &verdicts {
        v.print();
    }
    let failed: Vec<u8> = verdicts.iter().filter(|v| !v.passed()).map(|v| v.id).collect();
    println!(
        "\n{} of {} criteria passed; failing: {failed:?}",
        verdicts.len() - failed.len(),
        verdicts.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
