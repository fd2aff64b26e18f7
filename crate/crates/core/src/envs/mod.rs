//! Benchmark environments.

pub mod bandit;
pub mod figure1;
pub mod portfolio;
pub mod random;

pub use bandit::{bandit_as_mdp, bandit_exact_stats, bandit_sample, ArmDistribution, ArmStats, BanditSpec};
pub use figure1::figure1_mdp;
pub use portfolio::{portfolio_mdp, PortfolioConfig, RewardTiming};
pub use random::{random_ergodic_mdp, random_policy};
