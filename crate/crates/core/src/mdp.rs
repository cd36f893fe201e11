//! Tabular MDPs without a reward, exact planning, and the occupancy-measure view.
//!
//! Rewards are always linear in per-state features: `R(s) = w · φ(s)`, collected
//! at the state occupied at time `t` (the start state included). For a policy `π`
//! the discounted feature expectation is
//!
//! ```txt
//!     Ψ(π) = E[ Σ_t γ^t φ(s_t) ] = Σ_s φ(s) Σ_a x_sa
//! ```
//!
//! where `x_sa` is the occupancy measure, the unique solution of the Bellman flow
//! equations `Σ_a x_sa = D(s) + γ Σ_{s',a} x_{s'a} P(s | s', a)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const DENSE_SOLVE_MAX_STATES: usize = 128;

/// A tabular MDP without its reward function.
///
/// Transition rows are stored sparsely (successor index, probability); the JSON
/// document format in [`crate::io`] is dense.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    k: usize,
    gamma: f64,
    initial: Vec<f64>,
    /// Row `s * n_actions + a`.
    rows: Vec<Vec<(usize, f64)>>,
    /// Row-major `n_states × k`.
    features: Vec<f64>,
}

impl Mdp {
    /// Builds and validates an MDP from dense nested arrays
    /// (`transition[s][a][s']`, `features[s][j]`).
    pub fn new(
        gamma: f64,
        initial_dist: Vec<f64>,
        transition: Vec<Vec<Vec<f64>>>,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::InvalidMdp("n_states must be positive".into()));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::InvalidMdp("n_actions must be positive".into()));
        }
        if initial_dist.len() != n_states {
            return Err(Error::InvalidMdp(format!(
                "initial_dist has length {}, expected {n_states}",
                initial_dist.len()
            )));
        }
        let mut rows = Vec::with_capacity(n_states * n_actions);
        for (s, per_action) in transition.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::InvalidMdp(format!(
                    "transition[{s}] has {} actions, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::InvalidMdp(format!(
                        "transition[{s}][{a}] has length {}, expected {n_states}",
                        row.len()
                    )));
                }
                rows.push(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(|(j, &p)| (j, p))
                        .collect(),
                );
            }
        }
        let k = features.first().map_or(0, Vec::len);
        if features.len() != n_states {
            return Err(Error::InvalidMdp(format!(
                "features has {} rows, expected {n_states}",
                features.len()
            )));
        }
        for (s, f) in features.iter().enumerate() {
            if f.len() != k {
                return Err(Error::InvalidMdp(format!(
                    "features[{s}] has length {}, expected {k}",
                    f.len()
                )));
            }
        }
        Self::from_sparse(
            n_actions,
            gamma,
            initial_dist,
            rows,
            features.into_iter().flatten().collect(),
            k,
        )
    }

    /// Builds an MDP from sparse transition rows indexed by `s * n_actions + a`
    /// and row-major features.
    pub fn from_sparse(
        n_actions: usize,
        gamma: f64,
        initial_dist: Vec<f64>,
        rows: Vec<Vec<(usize, f64)>>,
        features: Vec<f64>,
        k: usize,
    ) -> Result<Self> {
        let n_states = initial_dist.len();
        let mdp = Mdp {
            n_states,
            n_actions,
            k,
            gamma,
            initial: initial_dist,
            rows,
            features,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_states, self.n_actions);
        if n == 0 || m == 0 {
            return Err(Error::InvalidMdp("n_states and n_actions must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidMdp("feature dimension k must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidMdp(format!("gamma = {} not in [0, 1)", self.gamma)));
        }
        check_distribution(&self.initial, "initial_dist").map_err(Error::InvalidMdp)?;
        if self.rows.len() != n * m {
            return Err(Error::InvalidMdp(format!(
                "expected {} transition rows, got {}",
                n * m,
                self.rows.len()
            )));
        }
        for (idx, row) in self.rows.iter().enumerate() {
            let (s, a) = (idx / m, idx % m);
            let mut sum = 0.0;
            for &(j, p) in row {
                if j >= n {
                    return Err(Error::InvalidMdp(format!(
                        "transition[{s}][{a}] points to state {j} >= {n}"
                    )));
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidMdp(format!(
                        "transition[{s}][{a}][{j}] = {p} is not a probability"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMdp(format!(
                    "transition[{s}][{a}] sums to {sum}, expected 1"
                )));
            }
        }
        if self.features.len() != n * self.k {
            return Err(Error::InvalidMdp("feature table has the wrong size".into()));
        }
        for (i, &f) in self.features.iter().enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidMdp(format!(
                    "features[{}][{}] = {f} outside [0, 1]",
                    i / self.k,
                    i % self.k
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Feature dimension.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial
    }

    /// Sparse successor distribution of `(s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.rows[s * self.n_actions + a]
    }

    pub fn features(&self, s: usize) -> &[f64] {
        &self.features[s * self.k..(s + 1) * self.k]
    }

    /// Dense `transition[s][a][s']`.
    pub fn dense_transitions(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        let mut row = vec![0.0; self.n_states];
                        for &(j, p) in self.successors(s, a) {
                            row[j] += p;
                        }
                        row
                    })
                    .collect()
            })
            .collect()
    }

    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.features.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    /// Upper bound `1/(1-γ)` on every feature-expectation component.
    pub fn horizon_mass(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Per-state rewards `w · φ(s)`.
    pub fn state_rewards(&self, weights: &[f64]) -> Vec<f64> {
        self.features.chunks(self.k).map(|f| dot(f, weights)).collect()
    }

    fn check_weights(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.k {
            return Err(Error::Shape(format!(
                "weights have length {}, MDP has k = {}",
                weights.len(),
                self.k
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("reward weights".into()));
        }
        Ok(())
    }
}

fn check_distribution(p: &[f64], what: &str) -> std::result::Result<(), String> {
    let mut sum = 0.0;
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(format!("{what}[{i}] = {v} is not a probability"));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("{what} sums to {sum}, expected 1"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A tabular policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "table", rename_all = "lowercase")]
pub enum Policy {
    /// `action_for[s]`.
    Deterministic(Vec<usize>),
    /// `action_dist[s][a]`.
    Stochastic(Vec<Vec<f64>>),
}

impl Policy {
    pub fn n_states(&self) -> usize {
        match self {
            Policy::Deterministic(t) => t.len(),
            Policy::Stochastic(t) => t.len(),
        }
    }

    /// `π(a | s)`.
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(t) => {
                if t[s] == a {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic(t) => t[s][a],
        }
    }

    /// Action distribution at `s` as a dense vector.
    pub fn action_dist(&self, s: usize, n_actions: usize) -> Vec<f64> {
        (0..n_actions).map(|a| self.prob(s, a)).collect()
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.n_states() != mdp.n_states() {
            return Err(Error::Shape(format!(
                "policy covers {} states, MDP has {}",
                self.n_states(),
                mdp.n_states()
            )));
        }
        match self {
            Policy::Deterministic(t) => {
                if let Some((s, &a)) = t.iter().enumerate().find(|(_, &a)| a >= mdp.n_actions()) {
                    return Err(Error::Shape(format!(
                        "policy[{s}] = {a} but the MDP has {} actions",
                        mdp.n_actions()
                    )));
                }
            }
            Policy::Stochastic(t) => {
                for (s, row) in t.iter().enumerate() {
                    if row.len() != mdp.n_actions() {
                        return Err(Error::Shape(format!(
                            "policy[{s}] has {} entries, MDP has {} actions",
                            row.len(),
                            mdp.n_actions()
                        )));
                    }
                    check_distribution(row, &format!("policy[{s}]")).map_err(Error::InvalidPolicy)?;
                }
            }
        }
        Ok(())
    }

    /// Dense stochastic table.
    pub fn to_stochastic(&self, n_actions: usize) -> Vec<Vec<f64>> {
        (0..self.n_states()).map(|s| self.action_dist(s, n_actions)).collect()
    }
}

/// A randomized policy: pick component `i` with probability `weight_i` once at
/// the start of the episode, then follow it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPolicy {
    pub components: Vec<(f64, Policy)>,
}

impl MixedPolicy {
    pub fn new(components: Vec<(f64, Policy)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidPolicy("mixture has no components".into()));
        }
        let mut sum = 0.0;
        for (i, (w, _)) in components.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidPolicy(format!("mixture weight {i} = {w}")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPolicy(format!("mixture weights sum to {sum}")));
        }
        Ok(MixedPolicy { components })
    }

    pub fn singleton(policy: Policy) -> Self {
        MixedPolicy {
            components: vec![(1.0, policy)],
        }
    }

    /// Uniform mixture.
    pub fn uniform(policies: Vec<Policy>) -> Result<Self> {
        let n = policies.len() as f64;
        Self::new(policies.into_iter().map(|p| (1.0 / n, p)).collect())
    }
}

/// Either a single policy or a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyPolicy {
    Single(Policy),
    Mixed(MixedPolicy),
}

impl From<Policy> for AnyPolicy {
    fn from(p: Policy) -> Self {
        AnyPolicy::Single(p)
    }
}

impl From<MixedPolicy> for AnyPolicy {
    fn from(m: MixedPolicy) -> Self {
        AnyPolicy::Mixed(m)
    }
}

/// Expected discounted state-action visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    n_states: usize,
    n_actions: usize,
    x: Vec<f64>,
}

impl OccupancyMeasure {
    /// Wraps a raw table indexed `s * n_actions + a`.
    pub fn from_raw(n_states: usize, n_actions: usize, x: Vec<f64>) -> Result<Self> {
        if x.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "occupancy table has {} entries, expected {}",
                x.len(),
                n_states * n_actions
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("occupancy measure".into()));
        }
        Ok(OccupancyMeasure {
            n_states,
            n_actions,
            x,
        })
    }

    /// `x_sa`, with tiny negative round-off clamped to zero.
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.x[s * self.n_actions + a].max(0.0)
    }

    pub fn state_mass(&self, s: usize) -> f64 {
        (0..self.n_actions).map(|a| self.get(s, a)).sum()
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.n_states).map(|s| self.state_mass(s)).sum()
    }

    pub fn raw(&self) -> &[f64] {
        &self.x
    }

    /// Sup-norm residual of the Bellman flow equations.
    pub fn flow_residual(&self, mdp: &Mdp) -> f64 {
        let mut inflow: Vec<f64> = mdp.initial_dist().to_vec();
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let x = self.get(s, a);
                if x == 0.0 {
                    continue;
                }
                for &(j, p) in mdp.successors(s, a) {
                    inflow[j] += mdp.gamma() * x * p;
                }
            }
        }
        (0..self.n_states)
            .map(|s| (self.state_mass(s) - inflow[s]).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_s φ(s) Σ_a x_sa`.
    pub fn feature_expectation(&self, mdp: &Mdp) -> FeatureExpectation {
        let mut mu = vec![0.0; mdp.k()];
        for s in 0..self.n_states {
            let m = self.state_mass(s);
            if m == 0.0 {
                continue;
            }
            for (acc, f) in mu.iter_mut().zip(mdp.features(s)) {
                *acc += f * m;
            }
        }
        FeatureExpectation(mu)
    }
}

/// Discounted cumulative feature vector `Ψ(π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureExpectation(pub Vec<f64>);

impl FeatureExpectation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        dot(&self.0, w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Output of an MDP solver: a deterministic policy, its feature expectation and
/// its value under the queried weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub policy: Policy,
    pub mu: FeatureExpectation,
    pub value: f64,
}

/// Something that plans in an MDP for given reward weights.
///
/// `solve(mdp, w, accuracy)` must return a policy whose value under `w` is at
/// least the optimum minus `accuracy`.
pub trait MdpSolver {
    fn solve(&self, mdp: &Mdp, weights: &[f64], accuracy: f64) -> Result<Plan>;
}

/// The exact planner: [`solve_mdp`] at `min(accuracy, tol)` (just `tol` when
/// the requested accuracy is zero).
#[derive(Debug, Clone, Copy)]
pub struct ExactSolver {
    pub tol: f64,
}

impl Default for ExactSolver {
    fn default() -> Self {
        ExactSolver { tol: 1e-10 }
    }
}

impl MdpSolver for ExactSolver {
    fn solve(&self, mdp: &Mdp, weights: &[f64], accuracy: f64) -> Result<Plan> {
        let tol = if accuracy > 0.0 { accuracy.min(self.tol) } else { self.tol };
        solve_mdp(mdp, weights, tol)
    }
}

/// Optimal deterministic policy under `R(s) = w · φ(s)` by value iteration.
///
/// Iterates until the sup-norm Bellman residual is at most
/// `tol·(1-γ)/(2γ)` with `tol` measured on the reward scale `max(1, ‖w‖₁)`,
/// so the greedy policy is within `tol·max(1, ‖w‖₁)` of optimal. Ties go to the
/// lowest action index. The returned `mu` comes from an exact flow solve.
pub fn solve_mdp(mdp: &Mdp, weights: &[f64], tol: f64) -> Result<Plan> {
    mdp.check_weights(weights)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let values = value_iteration(mdp, weights, tol);
    let policy = Policy::Deterministic(greedy(mdp, &values));
    let mu = feature_expectation(mdp, &policy)?;
    let value = mu.dot(weights);
    Ok(Plan { policy, mu, value })
}

fn value_iteration(mdp: &Mdp, weights: &[f64], tol: f64) -> Vec<f64> {
    let gamma = mdp.gamma();
    let rewards = mdp.state_rewards(weights);
    if gamma == 0.0 {
        return rewards;
    }
    let scale = weights.iter().map(|w| w.abs()).sum::<f64>().max(1.0);
    let target = tol * scale * (1.0 - gamma) / (2.0 * gamma);
    let mut v = rewards.clone();
    let mut next = vec![0.0; v.len()];
    loop {
        let mut residual: f64 = 0.0;
        let mut vmax: f64 = 0.0;
        for s in 0..mdp.n_states() {
            let best = (0..mdp.n_actions())
                .map(|a| expected(mdp.successors(s, a), &v))
                .fold(f64::NEG_INFINITY, f64::max);
            next[s] = rewards[s] + gamma * best;
            residual = residual.max((next[s] - v[s]).abs());
            vmax = vmax.max(next[s].abs());
        }
        // Round-off floor: the fixed point is only representable to a few ulps.
        let floor = 64.0 * f64::EPSILON * vmax / (1.0 - gamma);
        if residual <= target.max(floor) {
            return v;
        }
        std::mem::swap(&mut v, &mut next);
    }
}

fn expected(row: &[(usize, f64)], v: &[f64]) -> f64 {
    row.iter().map(|&(j, p)| p * v[j]).sum()
}

fn greedy(mdp: &Mdp, v: &[f64]) -> Vec<usize> {
    (0..mdp.n_states())
        .map(|s| {
            let mut best_a = 0;
            let mut best_q = expected(mdp.successors(s, 0), v);
            for a in 1..mdp.n_actions() {
                let q = expected(mdp.successors(s, a), v);
                if q > best_q + 1e-12 * (1.0 + best_q.abs()) {
                    best_a = a;
                    best_q = q;
                }
            }
            best_a
        })
        .collect()
}

/// Occupancy measure of `policy`, from the flow equations.
pub fn occupancy_measure(mdp: &Mdp, policy: &Policy) -> Result<OccupancyMeasure> {
    policy.validate(mdp)?;
    let d = state_visits(mdp, policy)?;
    let m = mdp.n_actions();
    let mut x = vec![0.0; mdp.n_states() * m];
    for (s, &ds) in d.iter().enumerate() {
        for a in 0..m {
            x[s * m + a] = ds * policy.prob(s, a);
        }
    }
    OccupancyMeasure::from_raw(mdp.n_states(), m, x)
}

/// Discounted state visits `d = (I - γ P_πᵀ)⁻¹ D`.
fn state_visits(mdp: &Mdp, policy: &Policy) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    // Sparse rows of P_π.
    let chain: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|s| {
            let mut row = Vec::new();
            for a in 0..mdp.n_actions() {
                let pa = policy.prob(s, a);
                if pa > 0.0 {
                    row.extend(mdp.successors(s, a).iter().map(|&(j, p)| (j, pa * p)));
                }
            }
            row
        })
        .collect();
    if n <= DENSE_SOLVE_MAX_STATES {
        let mut m = DMatrix::<f64>::identity(n, n);
        for (s, row) in chain.iter().enumerate() {
            for &(j, p) in row {
                m[(j, s)] -= gamma * p;
            }
        }
        let rhs = DVector::from_column_slice(mdp.initial_dist());
        let d = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Contract("flow system is singular".into()))?;
        return Ok(d.iter().copied().collect());
    }
    // Fixed-point iteration d ← D + γ P_πᵀ d converges geometrically at rate γ in
    // L1; stop once the a-posteriori error bound is at round-off level.
    let mut d = mdp.initial_dist().to_vec();
    let mut next = vec![0.0; n];
    let mass = mdp.horizon_mass();
    loop {
        next.copy_from_slice(mdp.initial_dist());
        for (s, row) in chain.iter().enumerate() {
            let ds = gamma * d[s];
            if ds == 0.0 {
                continue;
            }
            for &(j, p) in row {
                next[j] += ds * p;
            }
        }
        let delta: f64 = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut d, &mut next);
        if delta * gamma / (1.0 - gamma) <= 4.0 * f64::EPSILON * mass {
            return Ok(d);
        }
    }
}

/// Exact `Ψ(policy)` via the occupancy measure.
pub fn feature_expectation(mdp: &Mdp, policy: &Policy) -> Result<FeatureExpectation> {
    Ok(occupancy_measure(mdp, policy)?.feature_expectation(mdp))
}

/// `Σ_i p_i Ψ(π_i)`.
pub fn mixed_feature_expectation(mdp: &Mdp, mix: &MixedPolicy) -> Result<FeatureExpectation> {
    let mut mu = vec![0.0; mdp.k()];
    for (w, p) in &mix.components {
        let m = feature_expectation(mdp, p)?;
        for (acc, v) in mu.iter_mut().zip(&m.0) {
            *acc += w * v;
        }
    }
    Ok(FeatureExpectation(mu))
}

/// `Ψ` of a single or mixed policy.
pub fn any_feature_expectation(mdp: &Mdp, policy: &AnyPolicy) -> Result<FeatureExpectation> {
    match policy {
        AnyPolicy::Single(p) => feature_expectation(mdp, p),
        AnyPolicy::Mixed(m) => mixed_feature_expectation(mdp, m),
    }
}

/// Stochastic policy `π(a|s) = x_sa / Σ_a x_sa`; states with no mass get the
/// uniform distribution.
pub fn policy_from_occupancy(mdp: &Mdp, x: &OccupancyMeasure) -> Result<Policy> {
    if x.n_states != mdp.n_states() || x.n_actions != mdp.n_actions() {
        return Err(Error::Shape("occupancy measure does not match the MDP".into()));
    }
    let residual = x.flow_residual(mdp);
    if residual > 1e-6 {
        return Err(Error::FlowResidual { residual });
    }
    let m = mdp.n_actions();
    let table = (0..mdp.n_states())
        .map(|s| {
            let mass = x.state_mass(s);
            if mass > 1e-10 {
                (0..m).map(|a| x.get(s, a) / mass).collect()
            } else {
                vec![1.0 / m as f64; m]
            }
        })
        .collect();
    Ok(Policy::Stochastic(table))
}

/// Default Monte Carlo horizon `⌈log(1e-6)/log(γ)⌉`.
pub fn default_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        1
    } else {
        ((1e-6f64).ln() / gamma.ln()).ceil() as usize
    }
}

/// Empirical mean of `Σ_{t<horizon} γ^t φ(s_t)` over `n_rollouts` episodes.
pub fn monte_carlo_feature_expectation(
    mdp: &Mdp,
    policy: &Policy,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<FeatureExpectation> {
    policy.validate(mdp)?;
    if n_rollouts == 0 {
        return Err(Error::InvalidArgument("n_rollouts must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; mdp.k()];
    for _ in 0..n_rollouts {
        let mut s = sample_index(&mut rng, mdp.initial_dist().iter().copied());
        let mut discount = 1.0;
        for _ in 0..horizon {
            for (acc, f) in sum.iter_mut().zip(mdp.features(s)) {
                *acc += discount * f;
            }
            let a = sample_index(&mut rng, (0..mdp.n_actions()).map(|a| policy.prob(s, a)));
            s = sample_successor(&mut rng, mdp.successors(s, a));
            discount *= mdp.gamma();
        }
    }
    Ok(FeatureExpectation(
        sum.into_iter().map(|v| v / n_rollouts as f64).collect(),
    ))
}

pub(crate) fn sample_index<R: Rng>(rng: &mut R, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub(crate) fn sample_successor<R: Rng>(rng: &mut R, row: &[(usize, f64)]) -> usize {
    let i = sample_index(rng, row.iter().map(|&(_, p)| p));
    row[i].0
}

/// All `n_actions^n_states` deterministic policies, or `None` past `limit`.
pub fn enumerate_deterministic_policies(mdp: &Mdp, limit: usize) -> Option<Vec<Policy>> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let count = (m as u128).checked_pow(n as u32)?;
    if count > limit as u128 {
        return None;
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut table = vec![0usize; n];
    loop {
        out.push(Policy::Deterministic(table.clone()));
        let mut i = 0;
        loop {
            if i == n {
                return Some(out);
            }
            table[i] += 1;
            if table[i] < m {
                break;
            }
            table[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_state(gamma: f64) -> Mdp {
        Mdp::new(gamma, vec![1.0], vec![vec![vec![1.0]]], vec![vec![1.0]]).unwrap()
    }

    fn chain(gamma: f64) -> Mdp {
        // s0 -> s1, s1 absorbing; one action.
        Mdp::new(
            gamma,
            vec![1.0, 0.0],
            vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn single_state_value_is_geometric() {
        let plan = solve_mdp(&single_state(0.95), &[1.0], 1e-10).unwrap();
        assert_abs_diff_eq!(plan.value, 20.0, epsilon = 1e-9);
        let x = occupancy_measure(&single_state(0.95), &plan.policy).unwrap();
        assert_abs_diff_eq!(x.get(0, 0), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn two_state_chain_occupancy() {
        // x_{s0} = 1, x_{s1} = γ/(1-γ) = 1 at γ = 0.5.
        let mdp = chain(0.5);
        let x = occupancy_measure(&mdp, &Policy::Deterministic(vec![0, 0])).unwrap();
        assert_abs_diff_eq!(x.get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x.get(1, 0), 1.0, epsilon = 1e-12);
        assert!(x.flow_residual(&mdp) < 1e-12);
    }

    #[test]
    fn uniform_features_give_full_mass() {
        let mdp = Mdp::new(
            0.9,
            vec![0.5, 0.5],
            vec![
                vec![vec![0.3, 0.7], vec![1.0, 0.0]],
                vec![vec![0.5, 0.5], vec![0.0, 1.0]],
            ],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        for p in enumerate_deterministic_policies(&mdp, 16).unwrap() {
            let mu = feature_expectation(&mdp, &p).unwrap();
            assert_abs_diff_eq!(mu.0[0], 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn validation_names_offending_index() {
        let err = Mdp::new(
            0.9,
            vec![1.0, 0.0],
            vec![
                vec![vec![0.5, 0.5]],
                vec![vec![0.2, 0.7]],
            ],
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap_err();
        assert!(err.to_string().contains("transition[1][0]"), "{err}");

        let err = Mdp::new(1.0, vec![1.0], vec![vec![vec![1.0]]], vec![vec![1.0]]).unwrap_err();
        assert!(err.to_string().contains("gamma"));

        let err = Mdp::new(0.5, vec![1.0], vec![vec![vec![1.0]]], vec![vec![1.5]]).unwrap_err();
        assert!(err.to_string().contains("features[0][0]"));
    }

    #[test]
    fn non_finite_weights_rejected() {
        let err = solve_mdp(&single_state(0.5), &[f64::NAN], 1e-10).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn ties_break_to_lowest_action() {
        let mdp = Mdp::new(
            0.9,
            vec![1.0],
            vec![vec![vec![1.0], vec![1.0], vec![1.0]]],
            vec![vec![1.0]],
        )
        .unwrap();
        let plan = solve_mdp(&mdp, &[1.0], 1e-10).unwrap();
        assert_eq!(plan.policy, Policy::Deterministic(vec![0]));
    }

    #[test]
    fn occupancy_round_trip_for_deterministic_policy() {
        let mdp = chain(0.7);
        let p = Policy::Deterministic(vec![0, 0]);
        let x = occupancy_measure(&mdp, &p).unwrap();
        let back = policy_from_occupancy(&mdp, &x).unwrap();
        assert_eq!(back.prob(0, 0), 1.0);
    }

    #[test]
    fn policy_from_occupancy_rejects_bad_flow() {
        let mdp = chain(0.5);
        let x = OccupancyMeasure::from_raw(2, 1, vec![1.0, 3.0]).unwrap();
        assert!(matches!(
            policy_from_occupancy(&mdp, &x),
            Err(Error::FlowResidual { .. })
        ));
    }

    #[test]
    fn monte_carlo_single_state_is_truncated_geometric() {
        let mdp = single_state(0.5);
        let mu = monte_carlo_feature_expectation(&mdp, &Policy::Deterministic(vec![0]), 3, 4, 7)
            .unwrap();
        assert_abs_diff_eq!(mu.0[0], 1.0 + 0.5 + 0.25 + 0.125, epsilon = 1e-15);
    }

    #[test]
    fn enumeration_count() {
        let mdp = chain(0.5);
        assert_eq!(enumerate_deterministic_policies(&mdp, 10).unwrap().len(), 1);
        let big = Mdp::new(
            0.5,
            vec![1.0, 0.0],
            vec![
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ],
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap();
        assert_eq!(enumerate_deterministic_policies(&big, 4).unwrap().len(), 4);
        assert!(enumerate_deterministic_policies(&big, 3).is_none());
    }

    #[test]
    fn horizon_default() {
        assert_eq!(default_horizon(0.5), 20);
        assert_eq!(default_horizon(0.0), 1);
    }
}
