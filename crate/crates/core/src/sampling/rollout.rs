use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::bandit::{bandit_sample, BanditSpec};
use crate::error::{MsvError, Result};
use crate::mdp::{TabularMdp, TabularPolicy};
use crate::msv::{neg_part, RiskStats};

/// Anything a tabular agent can interact with.
pub trait Environment {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Samples `(reward, next_state)`.
    fn step(&self, state: usize, action: usize, rng: &mut dyn RngCore) -> (f64, usize);
}

impl Environment for TabularMdp {
    fn n_states(&self) -> usize {
        TabularMdp::n_states(self)
    }

    fn n_actions(&self) -> usize {
        TabularMdp::n_actions(self)
    }

    fn step(&self, state: usize, action: usize, rng: &mut dyn RngCore) -> (f64, usize) {
        let succ = self.successors(state, action);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = succ[succ.len() - 1].0;
        for &(s, p) in succ {
            acc += p;
            if u < acc {
                next = s;
                break;
            }
        }
        (self.reward()[(state, action)], next)
    }
}

/// The risky bandit as a continuing one-state process with sampled rewards.
#[derive(Debug, Clone, Default)]
pub struct BanditEnv {
    pub spec: BanditSpec,
}

impl Environment for BanditEnv {
    fn n_states(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        self.spec.n_arms()
    }

    fn step(&self, _state: usize, action: usize, rng: &mut dyn RngCore) -> (f64, usize) {
        let r = bandit_sample(&self.spec, action, rng).expect("action within arm range");
        (r, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// Consecutive transitions of one rollout segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub transitions: Vec<Transition>,
    /// Seed of the rollout that produced the batch.
    pub seed: u64,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.transitions.iter().map(|t| t.reward)
    }
}

fn sample_action(policy: &TabularPolicy, state: usize, rng: &mut impl Rng) -> usize {
    let row = policy.probs().row(state);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    row.len() - 1
}

/// A continuing trajectory whose batches chain into each other.
#[derive(Debug, Clone)]
pub struct Rollout {
    rng: ChaCha8Rng,
    state: usize,
    seed: u64,
}

impl Rollout {
    pub fn new(seed: u64, start_state: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: start_state,
            seed,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn collect<E: Environment + ?Sized>(&mut self, env: &E, policy: &TabularPolicy, n_steps: usize) -> Batch {
        let mut transitions = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let action = sample_action(policy, self.state, &mut self.rng);
            let (reward, next_state) = env.step(self.state, action, &mut self.rng);
            transitions.push(Transition {
                state: self.state,
                action,
                reward,
                next_state,
            });
            self.state = next_state;
        }
        Batch {
            transitions,
            seed: self.seed,
        }
    }

    /// Advances without recording.
    pub fn skip<E: Environment + ?Sized>(&mut self, env: &E, policy: &TabularPolicy, n_steps: usize) {
        for _ in 0..n_steps {
            let action = sample_action(policy, self.state, &mut self.rng);
            self.state = env.step(self.state, action, &mut self.rng).1;
        }
    }
}

fn check_env_policy<E: Environment + ?Sized>(env: &E, policy: &TabularPolicy) -> Result<()> {
    if (policy.n_states(), policy.n_actions()) != (env.n_states(), env.n_actions()) {
        return Err(MsvError::Dimension(format!(
            "policy is {}x{}, environment is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            env.n_states(),
            env.n_actions()
        )));
    }
    Ok(())
}

/// `n_steps` transitions from `start_state`; bit-reproducible per seed.
pub fn simulate<E: Environment + ?Sized>(
    env: &E,
    policy: &TabularPolicy,
    n_steps: usize,
    seed: u64,
    start_state: usize,
) -> Result<Batch> {
    check_env_policy(env, policy)?;
    if n_steps == 0 {
        return Err(MsvError::InvalidParameter("n_steps must be >= 1".into()));
    }
    if start_state >= env.n_states() {
        return Err(MsvError::Range(format!(
            "start state {start_state} outside 0..{}",
            env.n_states()
        )));
    }
    Ok(Rollout::new(seed, start_state).collect(env, policy, n_steps))
}

/// Sample moments of a reward stream, in the layout of [`RiskStats`].
pub fn empirical_stats(rewards: &[f64]) -> RiskStats {
    let n = rewards.len().max(1) as f64;
    let eta = rewards.iter().sum::<f64>() / n;
    let (mut zeta, mut zeta_minus, mut eta_minus) = (0.0, 0.0, 0.0);
    for &r in rewards {
        let d = r - eta;
        let dm = neg_part(d);
        zeta += d * d;
        zeta_minus += dm * dm;
        eta_minus += dm;
    }
    RiskStats {
        eta,
        zeta: zeta / n,
        zeta_minus: zeta_minus / n,
        eta_minus: eta_minus / n,
    }
}
