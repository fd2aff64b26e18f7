use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use msv_core::sampling::SamplingConfig;
use msv_core::solvers::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::env::EnvSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoKind {
    Msvtrpi,
    Mvpi,
    Msvpg,
    Msvac,
    Msvpo,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 5] = [Self::Msvtrpi, Self::Mvpi, Self::Msvpg, Self::Msvac, Self::Msvpo];

    pub fn name(self) -> &'static str {
        match self {
            Self::Msvtrpi => "msvtrpi",
            Self::Mvpi => "mvpi",
            Self::Msvpg => "msvpg",
            Self::Msvac => "msvac",
            Self::Msvpo => "msvpo",
        }
    }

    /// Optimizes the semivariance criterion (as opposed to the variance).
    pub fn is_msv(self) -> bool {
        self != Self::Mvpi
    }

    pub fn is_sampling(self) -> bool {
        matches!(self, Self::Msvac | Self::Msvpo)
    }
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgoKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .with_context(|| format!("unknown algorithm `{s}` (msvtrpi, mvpi, msvpg, msvac, msvpo)"))
    }
}

/// Exact policy-gradient ascent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgConfig {
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            iterations: 2000,
        }
    }
}

/// One experiment: every algorithm on every `(beta, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub algorithms: Vec<AlgoKind>,
    pub beta_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Doubles `beta` for the semivariance algorithms, so that they are
    /// compared with the variance baseline at a matched penalty scale.
    pub normalized_msv: bool,
    /// Worker threads; `SEMIVAR_RL_THREADS` caps it, default is all cores.
    pub threads: Option<usize>,
    /// Environment steps per sample-based training run.
    pub train_steps: usize,
    /// Steps simulated for evaluations that cannot be exact.
    pub eval_steps: usize,
    /// Histogram bins per cell; `0` disables histograms.
    pub hist_bins: usize,
    pub hist_steps: usize,
    pub env: EnvSpec,
    pub solver: SolverConfig,
    pub sampling: SamplingConfig,
    pub pg: PgConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![AlgoKind::Msvtrpi, AlgoKind::Mvpi],
            beta_grid: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            seeds: vec![0],
            out_dir: PathBuf::from("out"),
            normalized_msv: false,
            threads: None,
            train_steps: 1_000_000,
            eval_steps: 100_000,
            hist_bins: 0,
            hist_steps: 1_000_000,
            env: EnvSpec::default(),
            solver: SolverConfig::default(),
            sampling: SamplingConfig::default(),
            pg: PgConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.algorithms.is_empty() {
            bail!("no algorithms selected");
        }
        if self.beta_grid.is_empty() {
            bail!("beta grid is empty");
        }
        if let Some(b) = self.beta_grid.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            bail!("beta grid entry {b} is not a finite nonnegative number");
        }
        if self.seeds.is_empty() {
            bail!("seed list is empty");
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            bail!("seed list has duplicates");
        }
        if self.threads == Some(0) {
            bail!("threads must be >= 1");
        }
        if self.algorithms.iter().any(|a| a.is_sampling()) && self.train_steps == 0 {
            bail!("train_steps must be >= 1 for sample-based algorithms");
        }
        if self.eval_steps == 0 {
            bail!("eval_steps must be >= 1");
        }
        self.solver.validate()?;
        self.sampling.validate()?;
        Ok(())
    }

    /// `beta` actually optimized by `algo` at grid value `beta`.
    pub fn solved_beta(&self, algo: AlgoKind, beta: f64) -> f64 {
        if self.normalized_msv && algo.is_msv() {
            2.0 * beta
        } else {
            beta
        }
    }

    /// Worker count after applying `SEMIVAR_RL_THREADS`.
    pub fn worker_threads(&self) -> usize {
        let cap = std::env::var("SEMIVAR_RL_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok());
        let wanted = self
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        cap.map_or(wanted, |c| wanted.min(c.max(1)))
    }
}
