//! Experiment runner for mean-semivariance policy optimization: environment
//! selection, β-grid sweeps over exact and sample-based algorithms, and the
//! evaluation, histogram and verification tools behind the `semivar-rl`
//! binary.

pub mod config;
pub mod env;
pub mod runner;
pub mod tools;

pub use config::{AlgoKind, ExperimentConfig, PgConfig};
pub use env::{BuiltEnv, EnvSpec};
pub use runner::{run_cell, run_experiment, CellOutput, ExperimentOutcome, FrontierRow};
