//! Reference instances: the two-route example and random small problems.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::convex::Halfspace;
use crate::error::Result;
use crate::mdp::{FeatureExpectation, Mdp, Policy};
use crate::reward::RewardSpec;

/// Action index of the "top" route in [`two_route_mdp`].
pub const TOP: usize = 0;
/// Action index of the "bottom" route in [`two_route_mdp`].
pub const BOTTOM: usize = 1;

/// Three states, `γ = 0.99`. From the start state (features `(1, 1)`) action
/// [`TOP`] moves to an absorbing state with features `(1, 69/99)` and
/// [`BOTTOM`] to one with `(89/99, 89/99)`, so that
/// `Ψ(top) = (100, 70)` and `Ψ(bottom) = (90, 90)`.
pub fn two_route_mdp() -> Mdp {
    let stay = |s: usize| {
        let mut row = vec![0.0; 3];
        row[s] = 1.0;
        row
    };
    Mdp::new(
        0.99,
        vec![1.0, 0.0, 0.0],
        vec![
            vec![stay(1), stay(2)],
            vec![stay(1), stay(1)],
            vec![stay(2), stay(2)],
        ],
        vec![vec![1.0, 1.0], vec![1.0, 69.0 / 99.0], vec![89.0 / 99.0, 89.0 / 99.0]],
    )
    .expect("two-route MDP is valid")
}

pub fn two_route_policy(action: usize) -> Policy {
    Policy::Deterministic(vec![action, 0, 0])
}

/// The expert took the top route: `μ_E = (100, 70)`.
pub fn two_route_expert_mu() -> FeatureExpectation {
    FeatureExpectation(vec![100.0, 70.0])
}

/// Expert constraint with tolerance `epsilon` plus the nonnegativity and
/// `w1 + w2 ≥ 1` normalization of the worked example. With `epsilon = 25` the
/// maxmin value is 90, attained by the bottom route.
pub fn two_route_spec(epsilon: f64) -> Result<RewardSpec> {
    RewardSpec::expert_additive(Arc::new(two_route_mdp()), two_route_expert_mu(), epsilon)?.with_halfspaces(vec![
        Halfspace::new(vec![-1.0, 0.0], 0.0)?,
        Halfspace::new(vec![0.0, -1.0], 0.0)?,
        Halfspace::new(vec![-1.0, -1.0], -1.0)?,
    ])
}

/// The bare expert constraint over the box `[-1, 1]²`.
pub fn two_route_expert_only_spec(epsilon: f64) -> Result<RewardSpec> {
    RewardSpec::expert_additive(Arc::new(two_route_mdp()), two_route_expert_mu(), epsilon)
}

/// Random MDP with every transition row and the start distribution drawn by
/// normalizing uniform weights, and features uniform on `[0, 1]`.
pub fn random_mdp(n_states: usize, n_actions: usize, k: usize, gamma: f64, seed: u64) -> Mdp {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut simplex = |n: usize| {
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let sum: f64 = v.iter().sum();
        let mut p: Vec<f64> = v.iter().map(|x| x / sum).collect();
        // Push the rounding residue into the largest entry so rows sum to 1 exactly enough.
        let resid = 1.0 - p.iter().sum::<f64>();
        let imax = (0..n).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        p[imax] += resid;
        p
    };
    let initial = simplex(n_states);
    let transition = (0..n_states)
        .map(|_| (0..n_actions).map(|_| simplex(n_states)).collect())
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let features = (0..n_states).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
    Mdp::new(gamma, initial, transition, features).expect("random MDP is valid")
}

/// Random explicit polytope with `n_halfspaces` constraints, each with a random
/// unit-box normal and an offset leaving a random interior point `w0 ∈ [-½, ½]^k`
/// strictly inside.
pub fn random_explicit_spec(k: usize, n_halfspaces: usize, seed: u64) -> Result<RewardSpec> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w0: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mut hs = Vec::with_capacity(n_halfspaces);
    for _ in 0..n_halfspaces {
        let normal: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let offset = crate::mdp::dot(&normal, &w0) + rng.gen_range(0.05..0.5);
        hs.push(Halfspace::new(normal, offset)?);
    }
    RewardSpec::explicit(k, hs)
}
