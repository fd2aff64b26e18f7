//! Temperature of the closed-form KL trust-region step.
//!
//! The step `mu'(a|s) ∝ mu(a|s) exp(A(s,a) / v)` is optimal for the dual
//! `L(v) = v eps + v sum_s pi(s) log sum_a mu(a|s) exp(A(s,a) / v)`, which is
//! convex with `L'(v) = eps - E_pi KL(mu_v || mu)`.

use crate::error::{MsvError, Result};
use crate::mdp::TabularPolicy;
use crate::table::SaTable;

use super::SolverConfig;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_ITERS: usize = 400;

/// Minimizer of the dual and the divergence it realizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolution {
    pub temperature: f64,
    /// `E_pi KL(mu_v || mu)` at the returned temperature.
    pub kl: f64,
    /// The trust region is slack: the minimizer is the lower bracket edge,
    /// so the step is (numerically) the greedy one.
    pub at_lower_edge: bool,
}

/// Per-state `(max_a A, log sum_a mu exp((A - max) / v), E_{mu_v}[A])`.
fn tilt(adv: &[f64], mu: &[f64], v: f64) -> (f64, f64, f64) {
    let m = adv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut ea) = (0.0, 0.0);
    for (&a, &p) in adv.iter().zip(mu) {
        let w = p * ((a - m) / v).exp();
        z += w;
        ea += w * a;
    }
    (m, z.ln(), ea / z)
}

pub fn dual_objective(adv: &SaTable, pi: &[f64], policy: &TabularPolicy, eps: f64, v: f64) -> f64 {
    let mut total = v * eps;
    for (s, &w) in pi.iter().enumerate() {
        let (m, lse, _) = tilt(adv.row(s), policy.probs().row(s), v);
        total += w * (m + v * lse);
    }
    total
}

/// `E_pi KL(mu_v || mu)` for the tilted policy at temperature `v`.
pub fn tilted_kl(adv: &SaTable, pi: &[f64], policy: &TabularPolicy, v: f64) -> f64 {
    let mut total = 0.0;
    for (s, &w) in pi.iter().enumerate() {
        let (m, lse, ea) = tilt(adv.row(s), policy.probs().row(s), v);
        total += w * ((ea - m) / v - lse).max(0.0);
    }
    total
}

/// Golden-section search on `log v` over the configured bracket, refined by
/// bisection on the sign of `L'`. The returned temperature always satisfies
/// the KL constraint.
///
/// A minimizer at the lower edge means the constraint is slack (e.g. zero
/// advantages or a huge radius) and is returned as such; a minimizer at the
/// upper edge is a [`MsvError::BracketExhausted`] error.
pub fn solve_dual_temperature(
    adv: &SaTable,
    pi: &[f64],
    policy: &TabularPolicy,
    eps: f64,
    config: &SolverConfig,
) -> Result<DualSolution> {
    if !(eps > 0.0) {
        return Err(MsvError::InvalidParameter(format!("eps_mu must be > 0, got {eps}")));
    }
    if adv.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(MsvError::Domain("advantage table has non-finite entries".into()));
    }
    let (lo, hi) = config.dual_bracket;
    let slope = |v: f64| eps - tilted_kl(adv, pi, policy, v);

    if slope(lo) >= 0.0 {
        return Ok(DualSolution {
            temperature: lo,
            kl: tilted_kl(adv, pi, policy, lo),
            at_lower_edge: true,
        });
    }
    if slope(hi) < 0.0 {
        return Err(MsvError::BracketExhausted {
            edge: "upper",
            value: hi,
            lo,
            hi,
        });
    }

    let l = |t: f64| dual_objective(adv, pi, policy, eps, t.exp());
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (l(c), l(d));
    for _ in 0..MAX_ITERS {
        if b.exp() - a.exp() <= config.dual_tol * a.exp().max(1.0) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = l(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = l(d);
        }
    }

    // flat tails can fool the comparison; fall back to the full bracket
    // unless the golden bracket straddles the sign change of L'
    let (mut va, mut vb) = (a.exp(), b.exp());
    if !(slope(va) < 0.0 && slope(vb) >= 0.0) {
        va = lo;
        vb = hi;
    }
    for _ in 0..MAX_ITERS {
        if vb - va <= config.dual_tol * va.max(1.0) {
            break;
        }
        let mid = (va * vb).sqrt();
        if slope(mid) >= 0.0 {
            vb = mid;
        } else {
            va = mid;
        }
    }
    Ok(DualSolution {
        temperature: vb,
        kl: tilted_kl(adv, pi, policy, vb),
        at_lower_edge: false,
    })
}
