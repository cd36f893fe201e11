//! Follow-the-perturbed-leader maxmin learning.
//!
//! The agent and the reward designer play a repeated game. Each round the
//! agent best-responds to the perturbed sum of past weights and the designer
//! minimizes over `P_R` against the perturbed sum of the agent's feature
//! expectations so far. The uniform mixture of the agent's policies is an
//! approximate maxmin policy.

use std::io::Write;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CutMethod, Tolerances};
use crate::convex::{SeparationResponse, SolveReport};
use crate::error::{Error, Result};
use crate::mdp::{
    enumerate_deterministic_policies, feature_expectation, solve_mdp, FeatureExpectation, Mdp, MdpSolver,
    MixedPolicy, Plan, Policy,
};
use crate::reward::{so_reward, RewardMinimizer, RewardSpec, WsoConfig};

/// `k²(6 + 4√ln(1/ξ)) / √T`: with probability at least `1 - 2ξ` the output's
/// worst-case value is within this of the maxmin value.
pub fn regret_bound(k: usize, t: usize, xi: f64) -> f64 {
    let k = k as f64;
    k * k * (6.0 + 4.0 * (1.0 / xi).ln().sqrt()) / (t as f64).sqrt()
}

/// Per-player regret allowance `k²√T(3 + 2√ln(1/ξ))` over `T` rounds.
pub fn regret_allowance(k: usize, t: usize, xi: f64) -> f64 {
    let k = k as f64;
    k * k * (t as f64).sqrt() * (3.0 + 2.0 * (1.0 / xi).ln().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FplConfig {
    pub iterations: usize,
    /// Perturbation scale; `None` means `1/(k√T)`.
    #[serde(default)]
    pub delta: Option<f64>,
    pub seed: u64,
    /// Average the last this many policies; `None` means all of them.
    #[serde(default)]
    pub tail_window: Option<usize>,
    #[serde(default)]
    pub method: CutMethod,
    /// Confidence used when reporting bounds.
    pub xi: f64,
    /// Relative accuracy of each minimization over `P_R`.
    pub inner_eps: f64,
    /// Divisor of the planner input in the approximate variant; `None` means `2T`.
    #[serde(default)]
    pub approx_divisor: Option<f64>,
    #[serde(default)]
    pub tol: Tolerances,
}

impl FplConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        FplConfig {
            iterations,
            delta: None,
            seed,
            tail_window: None,
            method: CutMethod::default(),
            xi: 0.05,
            inner_eps: 1e-7,
            approx_divisor: None,
            tol: Tolerances::default(),
        }
    }

    /// Averages the last `ceil(fraction · T)` policies.
    pub fn with_tail_fraction(mut self, fraction: f64) -> Self {
        let w = (fraction * self.iterations as f64).ceil() as usize;
        self.tail_window = Some(w.clamp(1, self.iterations.max(1)));
        self
    }

    pub fn delta_for(&self, k: usize) -> f64 {
        self.delta.unwrap_or(1.0 / (k as f64 * (self.iterations as f64).sqrt()))
    }

    pub fn tail(&self) -> usize {
        self.tail_window.unwrap_or(self.iterations)
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("FPL needs at least one iteration".into()));
        }
        let delta = self.delta_for(k);
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        let tail = self.tail();
        if tail == 0 || tail > self.iterations {
            return Err(Error::InvalidArgument(format!(
                "tail window {tail} outside [1, {}]",
                self.iterations
            )));
        }
        if !(self.xi > 0.0 && self.xi < 0.5) {
            return Err(Error::InvalidArgument(format!("xi must lie in (0, 1/2), got {}", self.xi)));
        }
        if !(self.inner_eps > 0.0) {
            return Err(Error::InvalidArgument("inner_eps must be positive".into()));
        }
        Ok(())
    }
}

/// One round of play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FplRecord {
    /// 1-based round index.
    pub t: usize,
    pub w: Vec<f64>,
    pub mu: FeatureExpectation,
    pub policy: Policy,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub inner: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FplTrace {
    pub delta: f64,
    pub tail_window: usize,
    pub records: Vec<FplRecord>,
}

impl FplTrace {
    /// One JSON object per round.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str, delta: f64, tail_window: usize) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(FplTrace {
            delta,
            tail_window,
            records,
        })
    }

    /// Mean of `μ_t` over the tail window.
    pub fn tail_mean_mu(&self) -> FeatureExpectation {
        let tail = &self.records[self.records.len() - self.tail_window..];
        let k = tail[0].mu.len();
        let mut mean = vec![0.0; k];
        for r in tail {
            mean.iter_mut().zip(r.mu.as_slice()).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= tail.len() as f64);
        FeatureExpectation(mean)
    }
}

/// Uniform mixture over the tail window with repeated policies merged.
fn tail_mixture(records: &[FplRecord], tail: usize) -> Result<MixedPolicy> {
    let window = &records[records.len() - tail..];
    let mut comps: Vec<(f64, Policy)> = Vec::new();
    for r in window {
        match comps.iter_mut().find(|(_, p)| *p == r.policy) {
            Some((w, _)) => *w += 1.0,
            None => comps.push((1.0, r.policy.clone())),
        }
    }
    comps.iter_mut().for_each(|(w, _)| *w /= tail as f64);
    MixedPolicy::new(comps)
}

fn perturbations(seed: u64, t: usize, k: usize, delta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let mut draw = || -> Vec<f64> { (0..k).map(|_| rng.gen::<f64>() / delta).collect() };
    let p = draw();
    let q = draw();
    (p, q)
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn strip(mut report: SolveReport) -> SolveReport {
    report.queries = None;
    report
}

enum Agent<'a> {
    Exact,
    Approx {
        solver: &'a dyn MdpSolver,
        eta1: f64,
        divisor: f64,
        wso: WsoConfig,
    },
}

fn run(mdp: &Mdp, spec: &RewardSpec, cfg: &FplConfig, agent: Agent<'_>) -> Result<(MixedPolicy, FplTrace)> {
    let k = mdp.k();
    if spec.k() != k {
        return Err(Error::Shape(format!("reward spec has k = {}, MDP has k = {k}", spec.k())));
    }
    cfg.validate(k)?;
    let delta = cfg.delta_for(k);
    let mut minimizer = RewardMinimizer::new(spec, cfg.method, &cfg.tol);
    let mut sum_w = vec![0.0; k];
    let mut sum_mu = vec![0.0; k];
    let mut records = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let mut step = || -> Result<FplRecord> {
            let (p, q) = perturbations(cfg.seed, t, k, delta);
            let lead: Vec<f64> = sum_w.iter().zip(&p).map(|(a, b)| a + b).collect();
            let plan: Plan = match &agent {
                Agent::Exact => solve_mdp(mdp, &lead, cfg.tol.mdp_tol)?,
                Agent::Approx { solver, eta1, divisor, .. } => {
                    let scaled: Vec<f64> = lead.iter().map(|v| v / divisor).collect();
                    solver.solve(mdp, &scaled, *eta1)?
                }
            };
            let mu = feature_expectation(mdp, &plan.policy)?;
            let dir: Vec<f64> = sum_mu.iter().zip(mu.as_slice()).zip(&q).map(|((a, b), c)| a + b + c).collect();
            let eps = cfg.inner_eps * l1(&dir).max(1.0);
            let found = match &agent {
                Agent::Exact => minimizer.minimize(&dir, eps)?,
                Agent::Approx { solver, wso, .. } => {
                    let found = minimizer.minimize_approx(&dir, eps, wso, *solver)?;
                    // The shrunk weight must be a genuine member of P_R.
                    if let SeparationResponse::Cut(h) = so_reward(spec, &found.w, cfg.tol.reward_eps)? {
                        return Err(Error::Contract(format!(
                            "shrunk weight {:?} violates a P_R constraint by {:.3e}",
                            found.w,
                            h.violation(&found.w)
                        )));
                    }
                    found
                }
            };
            Ok(FplRecord {
                t,
                w: found.w,
                mu,
                policy: plan.policy,
                p,
                q,
                inner: strip(found.report),
            })
        };
        let rec = step().map_err(|e| e.at_iteration(t))?;
        sum_w.iter_mut().zip(&rec.w).for_each(|(a, b)| *a += b);
        sum_mu.iter_mut().zip(rec.mu.as_slice()).for_each(|(a, b)| *a += b);
        records.push(rec);
    }
    let tail = cfg.tail();
    let mixture = tail_mixture(&records, tail)?;
    Ok((
        mixture,
        FplTrace {
            delta,
            tail_window: tail,
            records,
        },
    ))
}

/// FPL maxmin learning with the exact planner.
pub fn fpl_solve(mdp: &Mdp, spec: &RewardSpec, cfg: &FplConfig) -> Result<(MixedPolicy, FplTrace)> {
    run(mdp, spec, cfg, Agent::Exact)
}

/// Accuracies used by [`fpl_solve_approx`] for slack `c`.
///
/// `η1 = c/(2T)` for the agent's planner and `η2 = cε/(2k²T - c)` for the
/// designer's oracle.
pub fn approx_accuracies(k: usize, t: usize, epsilon: f64, c: f64) -> Result<(f64, f64)> {
    let denom = 2.0 * (k * k) as f64 * t as f64 - c;
    if !(c >= 0.0) || !(denom > 0.0) {
        return Err(Error::InvalidArgument(format!("need 0 ≤ c < 2k²T, got c = {c}")));
    }
    Ok((c / (2.0 * t as f64), c * epsilon / denom))
}

/// FPL with an `η`-suboptimal planner for both players.
///
/// `spec` must be a single additive expert with nothing else. `c = 0` gives the
/// exact accuracies.
pub fn fpl_solve_approx(
    mdp: &Mdp,
    solver: &dyn MdpSolver,
    spec: &RewardSpec,
    cfg: &FplConfig,
    c: f64,
) -> Result<(MixedPolicy, FplTrace)> {
    let expert = spec.pure_additive().ok_or_else(|| {
        Error::InvalidRewardSpec("approximate FPL needs a single additive expert and no other constraints".into())
    })?;
    let (eta1, eta2) = approx_accuracies(mdp.k(), cfg.iterations.max(1), expert.epsilon, c)?;
    let divisor = cfg.approx_divisor.unwrap_or(2.0 * cfg.iterations as f64);
    if !(divisor > 0.0) {
        return Err(Error::InvalidArgument(format!("divisor must be positive, got {divisor}")));
    }
    let wso = WsoConfig::new(eta2, expert.epsilon)?;
    run(
        mdp,
        spec,
        cfg,
        Agent::Approx {
            solver,
            eta1,
            divisor,
            wso,
        },
    )
}

/// Empirical check of both players' regret against [`regret_allowance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCheck {
    /// `Σ w_t·μ_t`.
    pub payoff: f64,
    /// `min_{w ∈ P_R} Σ w·μ_t`.
    pub designer_best: f64,
    /// `max_μ Σ μ·w_t`.
    pub agent_best: f64,
    pub allowance: f64,
    pub designer_ok: bool,
    pub agent_ok: bool,
}

pub fn regret_check(mdp: &Mdp, spec: &RewardSpec, trace: &FplTrace, xi: f64, method: CutMethod) -> Result<RegretCheck> {
    let k = mdp.k();
    let mut sum_w = vec![0.0; k];
    let mut sum_mu = vec![0.0; k];
    let mut payoff = 0.0;
    for r in &trace.records {
        payoff += r.mu.dot(&r.w);
        sum_w.iter_mut().zip(&r.w).for_each(|(a, b)| *a += b);
        sum_mu.iter_mut().zip(r.mu.as_slice()).for_each(|(a, b)| *a += b);
    }
    let tol = Tolerances::default();
    let designer_best = RewardMinimizer::new(spec, method, &tol).minimize(&sum_mu, 1e-7 * l1(&sum_mu).max(1.0))?.value;
    let agent_best = solve_mdp(mdp, &sum_w, tol.mdp_tol)?.mu.dot(&sum_w);
    let allowance = regret_allowance(k, trace.records.len(), xi);
    Ok(RegretCheck {
        payoff,
        designer_best,
        agent_best,
        allowance,
        designer_ok: designer_best >= payoff - allowance,
        agent_ok: payoff >= agent_best - allowance,
    })
}

type PolicyTable = Arc<Vec<(Policy, FeatureExpectation)>>;

/// Planner that returns the second-best deterministic policy whenever it is
/// within the requested accuracy of the best one.
///
/// Policies are enumerated once per distinct MDP (at most 4096 of them).
#[derive(Debug, Default)]
pub struct SyntheticSuboptimalSolver {
    cache: Mutex<Vec<(Mdp, PolicyTable)>>,
}

impl SyntheticSuboptimalSolver {
    pub fn new() -> Self {
        Self::default()
    }

    fn table(&self, mdp: &Mdp) -> Result<PolicyTable> {
        let mut cache = self.cache.lock().expect("solver cache poisoned");
        if let Some((_, t)) = cache.iter().find(|(m, _)| m == mdp) {
            return Ok(t.clone());
        }
        let policies = enumerate_deterministic_policies(mdp, 4096)
            .ok_or_else(|| Error::SizeGuard("synthetic solver enumerates at most 4096 policies".into()))?;
        let table: Vec<_> = policies
            .into_iter()
            .map(|p| {
                let mu = feature_expectation(mdp, &p)?;
                Ok((p, mu))
            })
            .collect::<Result<_>>()?;
        let table = Arc::new(table);
        cache.push((mdp.clone(), table.clone()));
        Ok(table)
    }
}

impl MdpSolver for SyntheticSuboptimalSolver {
    fn solve(&self, mdp: &Mdp, weights: &[f64], accuracy: f64) -> Result<Plan> {
        let table = self.table(mdp)?;
        let mut order: Vec<(usize, f64)> = table.iter().map(|(_, mu)| mu.dot(weights)).enumerate().collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let best = order[0];
        // Skip policies tied with the best so "second-best" is a distinct value when one exists.
        let pick = order
            .iter()
            .skip(1)
            .find(|(_, v)| *v < best.1)
            .filter(|(_, v)| best.1 - v <= accuracy)
            .copied()
            .unwrap_or(best);
        let (policy, mu) = table[pick.0].clone();
        Ok(Plan {
            policy,
            value: pick.1,
            mu,
        })
    }
}
