//! Seeded random instances for property tests and the verification suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{TabularMdp, TabularPolicy};
use crate::table::SaTable;

/// Strictly positive Dirichlet(1, ..., 1) draw.
fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.gen_range(f64::EPSILON..1.0).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// MDP with dense strictly positive transitions and rewards uniform in
/// `[-reward_scale, reward_scale]`. Fully determined by `seed`.
pub fn random_ergodic_mdp(n_states: usize, n_actions: usize, seed: u64, reward_scale: f64) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transitions = (0..n_states * n_actions)
        .map(|_| simplex(&mut rng, n_states).into_iter().enumerate().collect())
        .collect();
    let reward = SaTable::from_fn(n_states, n_actions, |_, _| {
        if reward_scale > 0.0 {
            rng.gen_range(-reward_scale..=reward_scale)
        } else {
            0.0
        }
    });
    TabularMdp::new(n_states, n_actions, transitions, reward, Some(reward_scale.abs()))
        .expect("positive transitions are ergodic")
}

/// Softmax policy with logits uniform in `[-logit_scale, logit_scale]`.
pub fn random_policy(n_states: usize, n_actions: usize, seed: u64, logit_scale: f64) -> TabularPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = SaTable::from_fn(n_states, n_actions, |_, _| rng.gen_range(-logit_scale..=logit_scale));
    TabularPolicy::from_logits(logits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_strictly_positive() {
        let mdp = random_ergodic_mdp(5, 3, 11, 1.0);
        for s in 0..5 {
            for a in 0..3 {
                assert_eq!(mdp.successors(s, a).len(), 5);
                assert!(mdp.successors(s, a).iter().all(|&(_, p)| p > 0.0));
            }
        }
    }

    #[test]
    fn same_seed_same_mdp() {
        assert_eq!(random_ergodic_mdp(4, 2, 3, 2.0), random_ergodic_mdp(4, 2, 3, 2.0));
        assert_ne!(random_ergodic_mdp(4, 2, 3, 2.0), random_ergodic_mdp(4, 2, 4, 2.0));
    }
}
