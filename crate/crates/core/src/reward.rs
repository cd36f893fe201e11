//! The consistent reward polytope `P_R` and its separation oracles.
//!
//! `P_R` is the set of weights `w ∈ [-1, 1]^k` satisfying every explicit
//! halfspace, every pinned coordinate, and every expert constraint. An additive
//! expert with feature expectation `μ_E` and tolerance `ε` demands
//!
//! ```txt
//!     max_π w · Ψ(π) ≤ w · μ_E + ε
//! ```
//!
//! and a multiplicative one `(1 - ε) max_π w · Ψ(π) ≤ w · μ_E`. Neither is
//! available in closed form, but a planner call at `w` either confirms it or
//! produces the violated constraint of one specific policy, which is a valid cut.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{CutMethod, Tolerances};
use crate::convex::{
    accpm_minimize_warm, box_cut, maximize_linear_over_box, AccpmOptions, EllipsoidOptions,
    Halfspace, SeparationResponse, SolveReport, SolveStatus,
};
use crate::error::{Error, Result};
use crate::mdp::{dot, solve_mdp, FeatureExpectation, Mdp, MdpSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExpertBound {
    #[default]
    Additive,
    Multiplicative,
}

/// One demonstration: the expert's feature expectation in its own task MDP.
#[derive(Debug, Clone)]
pub struct Expert {
    pub task: Arc<Mdp>,
    pub mu_e: FeatureExpectation,
    pub epsilon: f64,
    pub bound: ExpertBound,
}

impl Expert {
    pub fn additive(task: Arc<Mdp>, mu_e: FeatureExpectation, epsilon: f64) -> Self {
        Expert {
            task,
            mu_e,
            epsilon,
            bound: ExpertBound::Additive,
        }
    }

    pub fn multiplicative(task: Arc<Mdp>, mu_e: FeatureExpectation, epsilon: f64) -> Self {
        Expert {
            task,
            mu_e,
            epsilon,
            bound: ExpertBound::Multiplicative,
        }
    }
}

/// Which construction a spec came from; derived from its contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecKind {
    Explicit,
    ExpertAdditive,
    ExpertMultiplicative,
    MultiExpert,
}

/// Declarative description of `P_R`. The box `[-1, 1]^k` is always included.
#[derive(Debug, Clone)]
pub struct RewardSpec {
    k: usize,
    halfspaces: Vec<Halfspace>,
    pinned: Vec<(usize, f64)>,
    experts: Vec<Expert>,
}

impl RewardSpec {
    pub fn explicit(k: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidRewardSpec("k must be positive".into()));
        }
        RewardSpec {
            k,
            halfspaces: Vec::new(),
            pinned: Vec::new(),
            experts: Vec::new(),
        }
        .with_halfspaces(halfspaces)
    }

    pub fn expert_additive(task: Arc<Mdp>, mu_e: FeatureExpectation, epsilon: f64) -> Result<Self> {
        Self::multi_expert(vec![Expert::additive(task, mu_e, epsilon)])
    }

    pub fn expert_multiplicative(task: Arc<Mdp>, mu_e: FeatureExpectation, epsilon: f64) -> Result<Self> {
        Self::multi_expert(vec![Expert::multiplicative(task, mu_e, epsilon)])
    }

    pub fn multi_expert(experts: Vec<Expert>) -> Result<Self> {
        let k = experts
            .first()
            .ok_or_else(|| Error::InvalidRewardSpec("at least one expert is required".into()))?
            .task
            .k();
        for (i, e) in experts.iter().enumerate() {
            if e.task.k() != k {
                return Err(Error::InvalidRewardSpec(format!(
                    "experts[{i}].task has k = {}, expected {k}",
                    e.task.k()
                )));
            }
            if e.mu_e.len() != k {
                return Err(Error::InvalidRewardSpec(format!(
                    "experts[{i}].mu_e has length {}, expected {k}",
                    e.mu_e.len()
                )));
            }
            if e.mu_e.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRewardSpec(format!("experts[{i}].mu_e is not finite")));
            }
            let ok = match e.bound {
                ExpertBound::Additive => e.epsilon >= 0.0 && e.epsilon.is_finite(),
                ExpertBound::Multiplicative => (0.0..1.0).contains(&e.epsilon),
            };
            if !ok {
                return Err(Error::InvalidRewardSpec(format!(
                    "experts[{i}].epsilon = {} out of range for a {:?} bound",
                    e.epsilon, e.bound
                )));
            }
        }
        if k == 0 {
            return Err(Error::InvalidRewardSpec("k must be positive".into()));
        }
        Ok(RewardSpec {
            k,
            halfspaces: Vec::new(),
            pinned: Vec::new(),
            experts,
        })
    }

    /// Adds explicit halfspaces `normal · w ≤ offset`.
    pub fn with_halfspaces(mut self, halfspaces: Vec<Halfspace>) -> Result<Self> {
        for (i, h) in halfspaces.iter().enumerate() {
            if h.dim() != self.k {
                return Err(Error::InvalidRewardSpec(format!(
                    "halfspaces[{i}] has dimension {}, expected {}",
                    h.dim(),
                    self.k
                )));
            }
            Halfspace::new(h.normal.clone(), h.offset)
                .map_err(|e| Error::InvalidRewardSpec(format!("halfspaces[{i}]: {e}")))?;
        }
        self.halfspaces.extend(halfspaces);
        Ok(self)
    }

    /// Fixes `w[index] = value` for each pair.
    pub fn with_pinned(mut self, pinned: Vec<(usize, f64)>) -> Result<Self> {
        for &(i, v) in &pinned {
            if i >= self.k {
                return Err(Error::InvalidRewardSpec(format!("pinned index {i} ≥ k = {}", self.k)));
            }
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidRewardSpec(format!(
                    "pinned value {v} for index {i} outside [-1, 1]"
                )));
            }
            if self.pinned.iter().any(|&(j, _)| j == i) {
                return Err(Error::InvalidRewardSpec(format!("index {i} pinned twice")));
            }
            self.pinned.push((i, v));
        }
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn pinned(&self) -> &[(usize, f64)] {
        &self.pinned
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn kind(&self) -> SpecKind {
        match self.experts.as_slice() {
            [] => SpecKind::Explicit,
            [e] => match e.bound {
                ExpertBound::Additive => SpecKind::ExpertAdditive,
                ExpertBound::Multiplicative => SpecKind::ExpertMultiplicative,
            },
            _ => SpecKind::MultiExpert,
        }
    }

    /// The single additive expert of a spec with nothing else in it.
    pub fn pure_additive(&self) -> Option<&Expert> {
        match (self.experts.as_slice(), self.halfspaces.is_empty(), self.pinned.is_empty()) {
            ([e], true, true) if e.bound == ExpertBound::Additive => Some(e),
            _ => None,
        }
    }

    /// Box faces, pinned pairs, and explicit halfspaces: the linear part of `P_R`.
    pub fn linear_constraints(&self) -> Vec<Halfspace> {
        let mut out = crate::convex::box_halfspaces(&vec![-1.0; self.k], &vec![1.0; self.k]);
        for &(i, v) in &self.pinned {
            let mut e = vec![0.0; self.k];
            e[i] = 1.0;
            out.push(Halfspace { normal: e.clone(), offset: v });
            e[i] = -1.0;
            out.push(Halfspace { normal: e, offset: -v });
        }
        out.extend(self.halfspaces.iter().cloned());
        out
    }

    fn check_query(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.k {
            return Err(Error::Shape(format!("weight has length {}, spec has k = {}", w.len(), self.k)));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reward weight query".into()));
        }
        Ok(())
    }

    /// First linear constraint violated by more than `tol`.
    fn linear_cut(&self, w: &[f64], tol: f64) -> Option<Halfspace> {
        let lo = vec![-1.0 - tol; self.k];
        let hi = vec![1.0 + tol; self.k];
        if let Some(mut h) = box_cut(w, &lo, &hi) {
            h.offset = h.offset.signum() * 1.0;
            return Some(h);
        }
        for &(i, v) in &self.pinned {
            if w[i] > v + tol || w[i] < v - tol {
                let mut e = vec![0.0; self.k];
                let s = if w[i] > v { 1.0 } else { -1.0 };
                e[i] = s;
                return Some(Halfspace { normal: e, offset: s * v });
            }
        }
        self.halfspaces.iter().find(|h| h.violation(w) > tol).cloned()
    }
}

/// Shared oracle body; `plan` returns a (possibly approximate) best response's `Ψ`.
fn separate_with(
    spec: &RewardSpec,
    w: &[f64],
    tol: f64,
    plan: &mut dyn FnMut(&Mdp, &[f64]) -> Result<FeatureExpectation>,
) -> Result<SeparationResponse> {
    spec.check_query(w)?;
    if let Some(h) = spec.linear_cut(w, tol) {
        return Ok(SeparationResponse::Cut(h));
    }
    for e in &spec.experts {
        let mu_w = plan(&e.task, w)?;
        let mu_e = e.mu_e.as_slice();
        let best = mu_w.dot(w);
        match e.bound {
            ExpertBound::Additive => {
                if best > dot(mu_e, w) + e.epsilon + tol {
                    let normal = mu_w.as_slice().iter().zip(mu_e).map(|(a, b)| a - b).collect();
                    return Ok(SeparationResponse::Cut(Halfspace {
                        normal,
                        offset: e.epsilon,
                    }));
                }
            }
            ExpertBound::Multiplicative => {
                if (1.0 - e.epsilon) * best > dot(mu_e, w) + tol {
                    if best < 0.0 {
                        return Err(Error::NegativeOptimum { value: best });
                    }
                    let normal = mu_w
                        .as_slice()
                        .iter()
                        .zip(mu_e)
                        .map(|(a, b)| (1.0 - e.epsilon) * a - b)
                        .collect();
                    return Ok(SeparationResponse::Cut(Halfspace { normal, offset: 0.0 }));
                }
            }
        }
    }
    Ok(SeparationResponse::Inside)
}

/// Separation oracle for `P_R` backed by the exact planner.
///
/// Linear constraints are checked first, then experts in listed order. A
/// constraint only counts as violated when it fails by more than `tol`.
pub fn so_reward(spec: &RewardSpec, w: &[f64], tol: f64) -> Result<SeparationResponse> {
    so_reward_with(spec, w, tol, Tolerances::default().mdp_tol)
}

/// [`so_reward`] with an explicit planner tolerance.
pub fn so_reward_with(spec: &RewardSpec, w: &[f64], tol: f64, mdp_tol: f64) -> Result<SeparationResponse> {
    separate_with(spec, w, tol, &mut |task, w| Ok(solve_mdp(task, w, mdp_tol)?.mu))
}

/// Parameters of the oracle built on an `η`-suboptimal planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsoConfig {
    pub eta: f64,
    /// `ε / (ε + η)`: maps every accepted weight back into `P_R`.
    pub epsilon_scale: f64,
}

impl WsoConfig {
    pub fn new(eta: f64, epsilon: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidArgument(format!("eta must be nonnegative, got {eta}")));
        }
        if !(epsilon > 0.0) && eta > 0.0 {
            return Err(Error::InvalidArgument("shrinking needs epsilon > 0 when eta > 0".into()));
        }
        let epsilon_scale = if eta == 0.0 { 1.0 } else { epsilon / (epsilon + eta) };
        Ok(WsoConfig { eta, epsilon_scale })
    }

    pub fn for_spec(spec: &RewardSpec, eta: f64) -> Result<Self> {
        let e = spec.pure_additive().ok_or_else(|| {
            Error::InvalidRewardSpec(
                "the approximate-planner oracle needs a single additive expert and no other constraints".into(),
            )
        })?;
        Self::new(eta, e.epsilon)
    }
}

/// The "weird" oracle: [`so_reward`] with the planner replaced by `solver`
/// called at accuracy `cfg.eta`.
///
/// It accepts all of `P_R` and nothing outside `P_R` widened to `ε + η`; its
/// accepted set need not be convex.
pub fn wso_reward(
    spec: &RewardSpec,
    w: &[f64],
    cfg: &WsoConfig,
    solver: &dyn MdpSolver,
    tol: f64,
) -> Result<SeparationResponse> {
    if spec.pure_additive().is_none() {
        return Err(Error::InvalidRewardSpec(
            "the approximate-planner oracle needs a single additive expert and no other constraints".into(),
        ));
    }
    separate_with(spec, w, tol, &mut |task, w| Ok(solver.solve(task, w, cfg.eta)?.mu))
}

/// Result of a minimization over `P_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardMin {
    /// Minimizer, accepted by the oracle that drove the search.
    pub w: Vec<f64>,
    /// `direction · w`.
    pub value: f64,
    /// Certified lower bound on the minimum over the searched set.
    pub bound: f64,
    /// The point found before shrinking (approximate path only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unscaled: Option<Vec<f64>>,
    pub report: SolveReport,
}

const POOL_CAP: usize = 4096;

/// Repeated linear minimization over one `P_R`.
///
/// Every cut an oracle returns is valid for the whole polytope, so cuts are kept
/// in a pool and seed later solves. Pinned coordinates are eliminated before
/// the cutting-plane search because equality constraints leave no interior.
pub struct RewardMinimizer<'a> {
    spec: &'a RewardSpec,
    method: CutMethod,
    tol: Tolerances,
    free: Vec<usize>,
    pool: Vec<Halfspace>,
    seen: HashSet<Vec<u64>>,
}

impl<'a> RewardMinimizer<'a> {
    pub fn new(spec: &'a RewardSpec, method: CutMethod, tol: &Tolerances) -> Self {
        let free = (0..spec.k).filter(|i| !spec.pinned.iter().any(|&(j, _)| j == *i)).collect();
        RewardMinimizer {
            spec,
            method,
            tol: tol.clone(),
            free,
            pool: Vec::new(),
            seen: HashSet::new(),
        }
    }

    /// Oracle acceptance slack used for every query.
    pub fn oracle_tol(&self) -> f64 {
        self.tol.reward_eps / 10.0
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    /// `min_{w ∈ P_R} direction · w` to accuracy `eps` with the exact oracle.
    pub fn minimize(&mut self, direction: &[f64], eps: f64) -> Result<RewardMin> {
        let (spec, tol, mdp_tol) = (self.spec, self.oracle_tol(), self.tol.mdp_tol);
        self.minimize_with(direction, eps, &mut |w| so_reward_with(spec, w, tol, mdp_tol))
    }

    /// Minimizes with the approximate-planner oracle, then shrinks the result by
    /// `cfg.epsilon_scale` so it lands in `P_R`.
    pub fn minimize_approx(
        &mut self,
        direction: &[f64],
        eps: f64,
        cfg: &WsoConfig,
        solver: &dyn MdpSolver,
    ) -> Result<RewardMin> {
        let (spec, tol) = (self.spec, self.oracle_tol());
        let mut found = self.minimize_with(direction, eps, &mut |w| wso_reward(spec, w, cfg, solver, tol))?;
        let shrunk: Vec<f64> = found.w.iter().map(|v| v * cfg.epsilon_scale).collect();
        found.value = dot(direction, &shrunk);
        found.unscaled = Some(std::mem::replace(&mut found.w, shrunk));
        Ok(found)
    }

    fn embed(&self, y: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.spec.k];
        for &(i, v) in &self.spec.pinned {
            w[i] = v;
        }
        for (&i, &v) in self.free.iter().zip(y) {
            w[i] = v;
        }
        w
    }

    fn minimize_with(
        &mut self,
        direction: &[f64],
        eps: f64,
        oracle: &mut dyn FnMut(&[f64]) -> Result<SeparationResponse>,
    ) -> Result<RewardMin> {
        self.spec.check_query(direction)?;
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        let n = self.free.len();
        if n == 0 {
            let w = self.embed(&[]);
            let mut report = SolveReport::new(false);
            report.oracle_calls = 1;
            return match oracle(&w)? {
                SeparationResponse::Inside => {
                    report.status = SolveStatus::Optimal;
                    let value = dot(direction, &w);
                    Ok(RewardMin { w, value, bound: value, unscaled: None, report })
                }
                SeparationResponse::Cut(_) => Err(Error::EmptyPolytope),
            };
        }

        let c: Vec<f64> = self.free.iter().map(|&i| direction[i]).collect();
        let pinned_part: f64 = self.spec.pinned.iter().map(|&(i, v)| direction[i] * v).sum();
        let lo = vec![-1.0; n];
        let hi = vec![1.0; n];
        let slack = self.oracle_tol();
        let warm = self.pool.clone();
        let mut fresh: Vec<Halfspace> = Vec::new();
        let mut empty = false;

        let outcome = {
            let this = &*self;
            let mut reduced = |y: &[f64]| -> Result<SeparationResponse> {
                if let Some(h) = warm.iter().chain(&fresh).find(|h| h.violation(y) > slack) {
                    return Ok(SeparationResponse::Cut(h.clone()));
                }
                let w = this.embed(y);
                match oracle(&w)? {
                    SeparationResponse::Inside => Ok(SeparationResponse::Inside),
                    SeparationResponse::Cut(h) => {
                        let normal: Vec<f64> = this.free.iter().map(|&i| h.normal[i]).collect();
                        let offset =
                            h.offset - this.spec.pinned.iter().map(|&(i, v)| h.normal[i] * v).sum::<f64>();
                        if normal.iter().all(|v| v.abs() < 1e-15) {
                            // Violated by the pinned part alone.
                            empty = true;
                            return Err(Error::EmptyPolytope);
                        }
                        let cut = Halfspace { normal, offset };
                        fresh.push(cut.clone());
                        Ok(SeparationResponse::Cut(cut))
                    }
                }
            };
            match self.method {
                CutMethod::Accpm => {
                    let opts = AccpmOptions {
                        max_iters: self.tol.accpm_max_iters,
                        newton_tol: self.tol.newton_tol,
                        newton_max_steps: self.tol.newton_max_steps,
                        lp_tol: self.tol.lp_tol,
                        cut_slack: self.tol.cut_slack,
                        record_queries: false,
                        probe_lp_vertex: true,
                    };
                    accpm_minimize_warm(&mut reduced, &c, &lo, &hi, eps, &opts, &warm)
                }
                CutMethod::Ellipsoid => {
                    let opts = EllipsoidOptions {
                        max_iters: self.tol.ellipsoid_max_iters,
                        record_queries: false,
                        cut_slack: self.tol.cut_slack,
                    };
                    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
                    maximize_linear_over_box(&mut reduced, &neg, &lo, &hi, eps, &opts).map(|mut o| {
                        o.value = -o.value;
                        o.bound = -o.bound;
                        o
                    })
                }
            }
        };
        for h in fresh {
            self.remember(h);
        }
        let outcome = match outcome {
            Err(Error::EmptyPolytope) if empty => return Err(Error::EmptyPolytope),
            other => other?,
        };
        let y = match outcome.point {
            Some(y) => y,
            None => return Err(Error::EmptyPolytope),
        };
        let w = self.embed(&y);
        let value = dot(direction, &w);
        Ok(RewardMin {
            w,
            value,
            bound: outcome.bound + pinned_part,
            unscaled: None,
            report: outcome.report,
        })
    }

    fn remember(&mut self, h: Halfspace) {
        if self.pool.len() >= POOL_CAP {
            return;
        }
        let key: Vec<u64> = h.normal.iter().chain(std::iter::once(&h.offset)).map(|v| v.to_bits()).collect();
        if self.seen.insert(key) {
            self.pool.push(h);
        }
    }
}

/// `min_{w ∈ P_R} direction · w` with default tolerances.
pub fn min_over_reward(spec: &RewardSpec, direction: &[f64], eps: f64, method: CutMethod) -> Result<RewardMin> {
    RewardMinimizer::new(spec, method, &Tolerances::default()).minimize(direction, eps)
}

/// Approximate-planner minimization followed by the `ε/(ε+η)` shrink.
pub fn min_over_reward_approx(
    spec: &RewardSpec,
    direction: &[f64],
    cfg: &WsoConfig,
    solver: &dyn MdpSolver,
    eps: f64,
    method: CutMethod,
) -> Result<RewardMin> {
    if spec.pure_additive().is_none() {
        return Err(Error::InvalidRewardSpec(
            "the approximate-planner oracle needs a single additive expert and no other constraints".into(),
        ));
    }
    RewardMinimizer::new(spec, method, &Tolerances::default()).minimize_approx(direction, eps, cfg, solver)
}
