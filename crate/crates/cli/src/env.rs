use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use msv_core::envs::bandit::BanditSpec;
use msv_core::envs::{bandit_as_mdp, figure1_mdp, portfolio_mdp, random_ergodic_mdp, PortfolioConfig};
use msv_core::io::load_mdp;
use msv_core::sampling::{BanditEnv, Environment};
use msv_core::TabularMdp;
use serde::{Deserialize, Serialize};

/// Environment selector. On the command line: `figure1`, `bandit`,
/// `bandit:<quantiles>`, `portfolio`, `random:<S>:<A>:<seed>` or
/// `file:<path>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Figure1,
    /// Exact solvers see the bandit discretized into `n_quantiles`
    /// outcomes per arm; sample-based learners pull the real arms.
    Bandit {
        #[serde(default = "default_quantiles")]
        n_quantiles: usize,
    },
    Portfolio(PortfolioConfig),
    Random {
        n_states: usize,
        n_actions: usize,
        seed: u64,
        #[serde(default = "default_reward_scale")]
        reward_scale: f64,
    },
    File {
        path: PathBuf,
    },
}

fn default_quantiles() -> usize {
    40
}

fn default_reward_scale() -> f64 {
    1.0
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self::Portfolio(PortfolioConfig::default())
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Figure1 => write!(f, "figure1"),
            Self::Bandit { n_quantiles } => write!(f, "bandit:{n_quantiles}"),
            Self::Portfolio(_) => write!(f, "portfolio"),
            Self::Random {
                n_states,
                n_actions,
                seed,
                ..
            } => write!(f, "random:{n_states}:{n_actions}:{seed}"),
            Self::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for EnvSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let parts: Vec<&str> = s.splitn(2, ':').collect();
        let arg = parts.get(1).copied();
        Ok(match (parts[0], arg) {
            ("figure1", None) => Self::Figure1,
            ("bandit", None) => Self::Bandit {
                n_quantiles: default_quantiles(),
            },
            ("bandit", Some(n)) => Self::Bandit {
                n_quantiles: n.parse().with_context(|| format!("bad quantile count `{n}`"))?,
            },
            ("portfolio", None) => Self::Portfolio(PortfolioConfig::default()),
            ("random", Some(rest)) => {
                let nums: Vec<u64> = rest
                    .split(':')
                    .map(|x| x.parse::<u64>())
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("bad random spec `{s}`"))?;
                let [n_states, n_actions, seed] = nums[..] else {
                    bail!("expected random:<S>:<A>:<seed>, got `{s}`");
                };
                Self::Random {
                    n_states: n_states as usize,
                    n_actions: n_actions as usize,
                    seed,
                    reward_scale: default_reward_scale(),
                }
            }
            ("file", Some(path)) => Self::File { path: path.into() },
            _ => bail!("unknown environment `{s}` (figure1, bandit[:n], portfolio, random:S:A:seed, file:path)"),
        })
    }
}

/// A built environment: the tabular model if there is one, and what the
/// sample-based learners interact with.
pub enum BuiltEnv {
    Tabular(TabularMdp),
    Bandit { mdp: TabularMdp, env: BanditEnv },
}

impl BuiltEnv {
    pub fn mdp(&self) -> &TabularMdp {
        match self {
            Self::Tabular(mdp) | Self::Bandit { mdp, .. } => mdp,
        }
    }

    pub fn sampler(&self) -> &dyn Environment {
        match self {
            Self::Tabular(mdp) => mdp,
            Self::Bandit { env, .. } => env,
        }
    }

    /// Whether the sampler's statistics are those of [`Self::mdp`].
    pub fn sampler_is_exact(&self) -> bool {
        matches!(self, Self::Tabular(_))
    }
}

impl EnvSpec {
    pub fn build(&self) -> anyhow::Result<BuiltEnv> {
        Ok(match self {
            Self::Figure1 => BuiltEnv::Tabular(figure1_mdp()),
            Self::Bandit { n_quantiles } => {
                let spec = BanditSpec::default();
                BuiltEnv::Bandit {
                    mdp: bandit_as_mdp(&spec, *n_quantiles)?,
                    env: BanditEnv { spec },
                }
            }
            Self::Portfolio(cfg) => BuiltEnv::Tabular(portfolio_mdp(cfg)?),
            Self::Random {
                n_states,
                n_actions,
                seed,
                reward_scale,
            } => {
                if *n_states == 0 || *n_actions == 0 {
                    bail!("random environment needs at least one state and one action");
                }
                BuiltEnv::Tabular(random_ergodic_mdp(*n_states, *n_actions, *seed, *reward_scale))
            }
            Self::File { path } => {
                BuiltEnv::Tabular(load_mdp(path).with_context(|| format!("loading {}", path.display()))?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors_parse_and_print() {
        for s in ["figure1", "bandit:12", "portfolio", "random:3:4:9", "file:/tmp/x.json"] {
            assert_eq!(s.parse::<EnvSpec>().unwrap().to_string(), s);
        }
        assert!("random:3:4".parse::<EnvSpec>().is_err());
        assert!("gridworld".parse::<EnvSpec>().is_err());
    }

    #[test]
    fn portfolio_section_defaults_to_the_published_setup() {
        let spec: EnvSpec = toml::from_str("kind = \"portfolio\"\ntransaction_cost = 0.02").unwrap();
        let EnvSpec::Portfolio(cfg) = spec else { panic!() };
        assert_eq!(cfg.transaction_cost, 0.02);
        assert_eq!(cfg.n_states(), 1344);
    }
}
