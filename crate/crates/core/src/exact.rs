//! Exact maxmin solver.
//!
//! The maxmin problem is the LP
//!
//! ```txt
//!     max z   s.t.  μ ∈ P_F,   z ≤ w · μ  for all w ∈ P_R
//! ```
//!
//! over the feature polytope `P_F` (all achievable `Ψ`) and the reward polytope
//! `P_R`. Neither is listed explicitly. `P_F` is separated through the flow LP of
//! the occupancy measure, and the `z` constraint by minimizing `w · μ` over
//! `P_R`. The ellipsoid method then maximizes `z`.
//!
//! `P_F` is often lower-dimensional (two routes give a segment in the plane), so
//! the search runs in coordinates of its affine hull, which is found with a
//! handful of planner calls.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{CutMethod, Tolerances};
use crate::convex::{
    caratheodory_decompose, maximize_linear_over_box, EllipsoidOptions, Halfspace, LinearProgram,
    Relation, SeparationResponse, Sense, SolveReport, SolveStatus,
};
use crate::error::{Error, Result};
use crate::mdp::{
    any_feature_expectation, dot, enumerate_deterministic_policies, feature_expectation,
    policy_from_occupancy, solve_mdp, AnyPolicy, FeatureExpectation, MixedPolicy, Mdp,
    OccupancyMeasure, Policy,
};
use crate::reward::{ExpertBound, RewardMinimizer, RewardSpec};

/// Closest point of `P_F` to a query in L1, with the dual certificate.
#[derive(Debug, Clone)]
pub struct FeatureProjection {
    /// `min ‖Φx - μ‖₁` over occupancy measures `x`.
    pub distance: f64,
    pub occupancy: OccupancyMeasure,
    /// Halfspace containing `P_F` and violated by the query by `distance`.
    pub cut: Option<Halfspace>,
}

/// Solves `min Σ(s⁺ + s⁻)` over flow constraints and `Φx + s⁺ - s⁻ = μ`.
pub fn project_to_feature_polytope(mdp: &Mdp, mu: &[f64], lp_tol: f64) -> Result<FeatureProjection> {
    let (n, m, k) = (mdp.n_states(), mdp.n_actions(), mdp.k());
    if mu.len() != k {
        return Err(Error::Shape(format!("query has length {}, MDP has k = {k}", mu.len())));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature query".into()));
    }
    let nx = n * m;
    let nv = nx + 2 * k;
    let mut obj = vec![0.0; nv];
    obj[nx..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = LinearProgram::new(obj, Sense::Minimize);
    let gamma = mdp.gamma();
    let mut flow = vec![vec![0.0; nv]; n];
    for s in 0..n {
        for a in 0..m {
            flow[s][s * m + a] += 1.0;
            for &(j, p) in mdp.successors(s, a) {
                flow[j][s * m + a] -= gamma * p;
            }
        }
    }
    for (s, row) in flow.into_iter().enumerate() {
        lp.constraint(row, Relation::Eq, mdp.initial_dist()[s]);
    }
    for j in 0..k {
        let mut row = vec![0.0; nv];
        for s in 0..n {
            let f = mdp.features(s)[j];
            for a in 0..m {
                row[s * m + a] = f;
            }
        }
        row[nx + j] = 1.0;
        row[nx + k + j] = -1.0;
        lp.constraint(row, Relation::Eq, mu[j]);
    }
    let sol = lp
        .solve(lp_tol)?
        .optimal()
        .ok_or_else(|| Error::Lp("flow LP has no optimum".into()))?;
    let occupancy = OccupancyMeasure::from_raw(n, m, sol.x[..nx].to_vec())?;
    // Duals satisfy u·D + y·Φx' ≤ 0 for every occupancy x', so y·μ' ≤ -u·D on P_F
    // while y·μ + u·D equals the distance at the query.
    let u = &sol.duals[..n];
    let y = sol.duals[n..].to_vec();
    let cut = if y.iter().any(|v| *v != 0.0) {
        Some(Halfspace {
            normal: y,
            offset: -dot(u, mdp.initial_dist()),
        })
    } else {
        None
    };
    Ok(FeatureProjection {
        distance: sol.value.max(0.0),
        occupancy,
        cut,
    })
}

/// Separation oracle for `P_F`: inside when the L1 distance is at most `tol`.
pub fn so_feature(mdp: &Mdp, mu: &[f64], tol: f64) -> Result<SeparationResponse> {
    let proj = project_to_feature_polytope(mdp, mu, 1e-10)?;
    if proj.distance <= tol {
        return Ok(SeparationResponse::Inside);
    }
    proj.cut
        .map(SeparationResponse::Cut)
        .ok_or_else(|| Error::Lp("flow LP reported a positive distance without a certificate".into()))
}

/// Affine hull `{origin + basis · y}` of `P_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineHull {
    pub origin: Vec<f64>,
    /// Orthonormal directions.
    pub basis: Vec<Vec<f64>>,
}

impl AffineHull {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn point(&self, y: &[f64]) -> Vec<f64> {
        let mut out = self.origin.clone();
        for (b, &yi) in self.basis.iter().zip(y) {
            for (o, v) in out.iter_mut().zip(b) {
                *o += yi * v;
            }
        }
        out
    }

    pub fn coordinates(&self, mu: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = mu.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        self.basis.iter().map(|b| dot(b, &d)).collect()
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    // Two passes of Gram-Schmidt for numerical safety.
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finds the affine hull of `P_F` with planner calls.
///
/// For a direction `v` orthogonal to the directions found so far, the spread
/// `max v·μ - min v·μ` over `P_F` comes from two planner calls. A spread above
/// `flat_tol` yields a new direction; otherwise `v` is normal to the hull.
pub fn feature_affine_hull(mdp: &Mdp, mdp_tol: f64, flat_tol: f64) -> Result<AffineHull> {
    let k = mdp.k();
    let n_actions = mdp.n_actions();
    let uniform = Policy::Stochastic(vec![vec![1.0 / n_actions as f64; n_actions]; mdp.n_states()]);
    let origin = feature_expectation(mdp, &uniform)?.0;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        // Each pass either adds a direction or proves e_j's remainder flat.
        for _ in 0..=k {
            let mut v = vec![0.0; k];
            v[j] = 1.0;
            let norm = orthogonalize(&mut v, &basis);
            if norm < 1e-9 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let hi = solve_mdp(mdp, &v, mdp_tol)?.mu.0;
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let lo = solve_mdp(mdp, &neg, mdp_tol)?.mu.0;
            let spread = dot(&v, &hi) - dot(&v, &lo);
            if spread <= flat_tol {
                break;
            }
            let mut cands = Vec::new();
            for p in [&hi, &lo] {
                let mut d: Vec<f64> = p.iter().zip(&origin).map(|(a, b)| a - b).collect();
                let nd = orthogonalize(&mut d, &basis);
                cands.push((nd, d));
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0));
            let (nd, mut d) = cands.swap_remove(0);
            if nd <= flat_tol {
                break;
            }
            d.iter_mut().for_each(|x| *x /= nd);
            basis.push(d);
            if basis.len() == k {
                return Ok(AffineHull { origin, basis });
            }
        }
    }
    Ok(AffineHull { origin, basis })
}

/// Separation oracle for `{(μ, z) : μ ∈ P_F, z ≤ min_{w∈P_R} w·μ}` in `R^{k+1}`.
pub fn so_maxmin(mdp: &Mdp, spec: &RewardSpec, mu: &[f64], z: f64, eps: f64) -> Result<SeparationResponse> {
    let tol = Tolerances::default();
    let mut minimizer = RewardMinimizer::new(spec, CutMethod::default(), &tol);
    let mut inner = SolveReport::new(false);
    maxmin_separate(mdp, &mut minimizer, mu, z, eps, &tol, &mut inner)
}

fn maxmin_separate(
    mdp: &Mdp,
    minimizer: &mut RewardMinimizer<'_>,
    mu: &[f64],
    z: f64,
    eps: f64,
    tol: &Tolerances,
    inner: &mut SolveReport,
) -> Result<SeparationResponse> {
    let k = mdp.k();
    if let SeparationResponse::Cut(h) = so_feature(mdp, mu, eps / 10.0)? {
        let mut normal = h.normal;
        normal.push(0.0);
        return Ok(SeparationResponse::Cut(Halfspace { normal, offset: h.offset }));
    }
    let scale = mu.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let found = minimizer.minimize(mu, tol.reward_eps * scale)?;
    inner.absorb(&found.report);
    if z <= found.value + eps / 10.0 {
        return Ok(SeparationResponse::Inside);
    }
    let mut normal: Vec<f64> = found.w.iter().map(|v| -v).collect();
    normal.push(1.0);
    debug_assert_eq!(normal.len(), k + 1);
    Ok(SeparationResponse::Cut(Halfspace { normal, offset: 0.0 }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOptions {
    pub eps: f64,
    /// Engine for the inner minimizations over `P_R`.
    pub method: CutMethod,
    pub tol: Tolerances,
    pub record_queries: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        let tol = Tolerances::default();
        ExactOptions {
            eps: tol.maxmin_eps,
            method: CutMethod::default(),
            tol,
            record_queries: false,
        }
    }
}

/// Result of an exact maxmin solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxminSolution {
    /// Worst-case value of `policy` over `P_R`.
    pub value: f64,
    /// `Ψ(policy)`.
    pub mu_star: FeatureExpectation,
    pub policy: AnyPolicy,
    /// Minimizer of `w · mu_star` over `P_R`.
    pub worst_weight: Vec<f64>,
    /// Outer ellipsoid search (in affine-hull coordinates of `P_F`).
    pub report: SolveReport,
    /// All minimizations over `P_R` combined.
    pub inner_report: SolveReport,
    /// Dimension of the affine hull of `P_F`.
    pub feature_dim: usize,
}

/// Solves the maxmin problem with the ellipsoid method.
pub fn solve_maxmin_exact(mdp: &Mdp, spec: &RewardSpec, opts: &ExactOptions) -> Result<MaxminSolution> {
    if spec.k() != mdp.k() {
        return Err(Error::Shape(format!("reward spec has k = {}, MDP has k = {}", spec.k(), mdp.k())));
    }
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {}", opts.eps)));
    }
    let tol = &opts.tol;
    let k = mdp.k();
    let horizon = mdp.horizon_mass();
    let hull = feature_affine_hull(mdp, tol.mdp_tol, 1e-9 * horizon)?;
    let r = hull.dim();
    let mut minimizer = RewardMinimizer::new(spec, opts.method, tol);
    let mut inner = SolveReport::new(false);

    let (mu_query, report) = if r == 0 {
        let mut report = SolveReport::new(false);
        report.status = SolveStatus::Optimal;
        (hull.origin.clone(), report)
    } else {
        let mut lo = Vec::with_capacity(r + 1);
        let mut hi = Vec::with_capacity(r + 1);
        for b in &hull.basis {
            let reach = b.iter().map(|v| v.abs()).sum::<f64>() * horizon;
            lo.push(-reach);
            hi.push(reach);
        }
        lo.push(-(k as f64) * horizon);
        hi.push(k as f64 * horizon);
        let mut c = vec![0.0; r + 1];
        c[r] = 1.0;
        let eopts = EllipsoidOptions {
            max_iters: tol.ellipsoid_max_iters,
            record_queries: opts.record_queries,
            cut_slack: tol.cut_slack,
        };
        let eps = opts.eps;
        let mut oracle = |q: &[f64]| -> Result<SeparationResponse> {
            let mu = hull.point(&q[..r]);
            match maxmin_separate(mdp, &mut minimizer, &mu, q[r], eps, tol, &mut inner)? {
                SeparationResponse::Inside => Ok(SeparationResponse::Inside),
                SeparationResponse::Cut(h) => {
                    let a_mu = &h.normal[..k];
                    let mut normal: Vec<f64> = hull.basis.iter().map(|b| dot(b, a_mu)).collect();
                    normal.push(h.normal[k]);
                    let offset = h.offset - dot(a_mu, &hull.origin);
                    if normal.iter().all(|v| v.abs() < 1e-14) {
                        return Err(Error::Contract("cut is parallel to the feature hull".into()));
                    }
                    Ok(SeparationResponse::Cut(Halfspace { normal, offset }))
                }
            }
        };
        let opt = maximize_linear_over_box(&mut oracle, &c, &lo, &hi, eps, &eopts)?;
        let point = opt.point.ok_or(Error::EmptyPolytope)?;
        (hull.point(&point[..r]), opt.report)
    };

    let proj = project_to_feature_polytope(mdp, &mu_query, tol.lp_tol)?;
    let mut policy = policy_from_occupancy(mdp, &proj.occupancy)?;
    let mut mu_star = feature_expectation(mdp, &policy)?;
    let scale = mu_star.as_slice().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let mut worst = minimizer.minimize(mu_star.as_slice(), tol.reward_eps * scale)?;
    inner.absorb(&worst.report);
    // The search ends anywhere in an eps-band around the optimum, which often
    // makes a vertex policy come back slightly randomized. Prefer the rounded
    // policy when it is at least as good up to the search accuracy.
    if let Policy::Stochastic(table) = &policy {
        let rounded = Policy::Deterministic(
            table
                .iter()
                .map(|row| (0..row.len()).fold(0, |best, a| if row[a] > row[best] { a } else { best }))
                .collect(),
        );
        let mu_r = feature_expectation(mdp, &rounded)?;
        let cand = minimizer.minimize(mu_r.as_slice(), tol.reward_eps * scale)?;
        inner.absorb(&cand.report);
        if cand.value >= worst.value - opts.eps / 10.0 {
            policy = rounded;
            mu_star = mu_r;
            worst = cand;
        }
    }
    inner.status = worst.report.status;
    Ok(MaxminSolution {
        value: worst.value,
        mu_star,
        policy: AnyPolicy::Single(policy),
        worst_weight: worst.w,
        report,
        inner_report: inner,
        feature_dim: r,
    })
}

/// Worst-case value of a fixed policy over `P_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub value: f64,
    pub witness: Vec<f64>,
    pub mu: FeatureExpectation,
}

/// `min_{w ∈ P_R} w · Ψ(policy)` to accuracy `eps`.
pub fn evaluate_worst_case(
    mdp: &Mdp,
    spec: &RewardSpec,
    policy: &AnyPolicy,
    eps: f64,
    method: CutMethod,
) -> Result<WorstCase> {
    let mu = any_feature_expectation(mdp, policy)?;
    let found = RewardMinimizer::new(spec, method, &Tolerances::default()).minimize(mu.as_slice(), eps)?;
    Ok(WorstCase {
        value: found.value,
        witness: found.w,
        mu,
    })
}

/// Writes `mu_star` as a mixture of candidate policies with known `Ψ`.
pub fn recover_policy_mixture(
    mu_star: &[f64],
    candidates: &[(Policy, FeatureExpectation)],
) -> Result<MixedPolicy> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate policies".into()));
    }
    let points: Vec<Vec<f64>> = candidates.iter().map(|(_, m)| m.0.clone()).collect();
    let weights = caratheodory_decompose(&points, mu_star, 1e-9)?;
    MixedPolicy::new(weights.into_iter().map(|(i, w)| (w, candidates[i].0.clone())).collect())
}

/// Result of [`brute_force_maxmin`].
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub value: f64,
    pub mixture: MixedPolicy,
    pub mu: FeatureExpectation,
    /// The finite set standing in for `P_R`.
    pub weight_points: usize,
}

const BRUTE_POLICY_LIMIT: usize = 4096;

fn enumerate_with_mu(mdp: &Mdp) -> Result<Vec<(Policy, FeatureExpectation)>> {
    let policies = enumerate_deterministic_policies(mdp, BRUTE_POLICY_LIMIT).ok_or_else(|| {
        Error::SizeGuard(format!(
            "{}^{} deterministic policies exceed {BRUTE_POLICY_LIMIT}",
            mdp.n_actions(),
            mdp.n_states()
        ))
    })?;
    policies
        .into_iter()
        .map(|p| {
            let mu = feature_expectation(mdp, &p)?;
            Ok((p, mu))
        })
        .collect()
}

/// Membership in `P_R` by exhaustive policy enumeration of every expert task.
pub struct BruteForceMembership<'a> {
    spec: &'a RewardSpec,
    linear: Vec<Halfspace>,
    expert_mus: Vec<Vec<FeatureExpectation>>,
}

impl<'a> BruteForceMembership<'a> {
    pub fn new(spec: &'a RewardSpec) -> Result<Self> {
        let expert_mus = spec
            .experts()
            .iter()
            .map(|e| Ok(enumerate_with_mu(&e.task)?.into_iter().map(|(_, m)| m).collect()))
            .collect::<Result<_>>()?;
        Ok(BruteForceMembership {
            spec,
            linear: spec.linear_constraints(),
            expert_mus,
        })
    }

    /// Largest constraint violation at `w` (nonpositive means inside).
    pub fn violation(&self, w: &[f64]) -> f64 {
        let mut worst = self.linear.iter().map(|h| h.violation(w)).fold(f64::NEG_INFINITY, f64::max);
        for (e, mus) in self.spec.experts().iter().zip(&self.expert_mus) {
            let best = mus.iter().map(|m| m.dot(w)).fold(f64::NEG_INFINITY, f64::max);
            let target = e.mu_e.dot(w);
            let v = match e.bound {
                ExpertBound::Additive => best - target - e.epsilon,
                ExpertBound::Multiplicative => (1.0 - e.epsilon) * best - target,
            };
            worst = worst.max(v);
        }
        worst
    }

    /// `max_π w·Ψ(π)` in the first expert's task, or `None` without experts.
    pub fn expert_best(&self, i: usize, w: &[f64]) -> Option<f64> {
        self.expert_mus
            .get(i)
            .map(|mus| mus.iter().map(|m| m.dot(w)).fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Vertices of `{w : a_i · w ≤ b_i}` by solving every `k × k` subsystem.
fn polytope_vertices(hs: &[Halfspace], k: usize) -> Vec<Vec<f64>> {
    let m = hs.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if m < k {
        return out;
    }
    loop {
        let a = DMatrix::from_fn(k, k, |i, j| hs[idx[i]].normal[j]);
        let b = DVector::from_fn(k, |i, _| hs[idx[i]].offset);
        let lu = a.lu();
        if lu.determinant().abs() > 1e-12 {
            if let Some(x) = lu.solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if hs.iter().all(|h| h.violation(&x) <= 1e-9)
                    && !out.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-9))
                {
                    out.push(x);
                }
            }
        }
        // Next k-combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < m - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Reference maxmin value by enumeration.
///
/// Enumerates deterministic policies (at most 4096), replaces `P_R` by its
/// vertices (no experts, at most 12 explicit halfspaces, `k ≤ 4`) or by a grid
/// of step 0.01 over the free coordinates (experts, at most 3 free
/// coordinates), and solves the resulting matrix game by constraint
/// generation.
pub fn brute_force_maxmin(mdp: &Mdp, spec: &RewardSpec) -> Result<BruteForce> {
    let policies = enumerate_with_mu(mdp)?;
    let k = spec.k();
    let points: Vec<Vec<f64>> = if spec.experts().is_empty() {
        if spec.halfspaces().len() > 12 || k > 4 {
            return Err(Error::SizeGuard("vertex enumeration needs ≤ 12 halfspaces and k ≤ 4".into()));
        }
        polytope_vertices(&spec.linear_constraints(), k)
    } else {
        let free: Vec<usize> = (0..k).filter(|i| !spec.pinned().iter().any(|&(j, _)| j == *i)).collect();
        if free.len() > 3 {
            return Err(Error::SizeGuard("grid approximation needs ≤ 3 free coordinates".into()));
        }
        let member = BruteForceMembership::new(spec)?;
        let steps = 201usize;
        let total = steps.pow(free.len() as u32);
        let mut pts = Vec::new();
        let mut w = vec![0.0; k];
        for &(i, v) in spec.pinned() {
            w[i] = v;
        }
        for mut code in 0..total {
            for &i in &free {
                w[i] = -1.0 + 0.01 * (code % steps) as f64;
                code /= steps;
            }
            if member.violation(&w) <= 1e-9 {
                pts.push(w.clone());
            }
        }
        pts
    };
    if points.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    let payoff: Vec<Vec<f64>> = points.iter().map(|w| policies.iter().map(|(_, m)| m.dot(w)).collect()).collect();
    let n = policies.len();

    // max z s.t. z ≤ Σ_i p_i payoff[w][i] for active w, Σ p = 1, with z = z⁺ - z⁻.
    let mut active = vec![0usize];
    let (p, value) = loop {
        let mut obj = vec![0.0; n + 2];
        obj[n] = 1.0;
        obj[n + 1] = -1.0;
        let mut lp = LinearProgram::new(obj, Sense::Maximize);
        for &wi in &active {
            let mut row: Vec<f64> = payoff[wi].iter().map(|v| -v).collect();
            row.push(1.0);
            row.push(-1.0);
            lp.constraint(row, Relation::Le, 0.0);
        }
        let mut sum = vec![1.0; n];
        sum.extend([0.0, 0.0]);
        lp.constraint(sum, Relation::Eq, 1.0);
        let sol = lp
            .solve(1e-11)?
            .optimal()
            .ok_or_else(|| Error::Lp("matrix game LP has no optimum".into()))?;
        let p = sol.x[..n].to_vec();
        let (worst_i, worst) = payoff
            .iter()
            .enumerate()
            .map(|(i, row)| (i, dot(row, &p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if worst >= sol.value - 1e-10 || active.contains(&worst_i) {
            break (p, worst);
        }
        active.push(worst_i);
    };
    let mut comps: Vec<(f64, Policy)> = p
        .iter()
        .zip(&policies)
        .filter(|(w, _)| **w > 1e-12)
        .map(|(w, (pol, _))| (*w, pol.clone()))
        .collect();
    let total: f64 = comps.iter().map(|(w, _)| w).sum();
    comps.iter_mut().for_each(|(w, _)| *w /= total);
    let mut mu = vec![0.0; k];
    for (w, pol) in &comps {
        let m = &policies.iter().find(|(q, _)| q == pol).unwrap().1;
        mu.iter_mut().zip(m.as_slice()).for_each(|(a, b)| *a += w * b);
    }
    Ok(BruteForce {
        value,
        mixture: MixedPolicy::new(comps)?,
        mu: FeatureExpectation(mu),
        weight_points: points.len(),
    })
}
