use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use maxmin_core::config::{CutMethod, Tolerances};
use maxmin_core::error::Error;
use maxmin_core::exact::{evaluate_worst_case, solve_maxmin_exact, ExactOptions, WorstCase};
use maxmin_core::fpl::{
    fpl_solve, fpl_solve_approx, regret_bound, regret_check, FplConfig, RegretCheck, SyntheticSuboptimalSolver,
};
use maxmin_core::gridworld::{fraction_table, run_experiment, ExperimentConfig, ExperimentReport};
use maxmin_core::io::{load_mdp, load_policy, load_reward_spec, write_atomic, write_json_atomic};
use maxmin_core::mdp::{mixed_feature_expectation, FeatureExpectation, MixedPolicy};

use crate::manifest::ManifestBuilder;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 0 success, 1 input error, 2 empty or infeasible problem, 3 solver breakdown.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.root() {
                Error::EmptyPolytope => 2,
                Error::EllipsoidBreakdown { .. }
                | Error::Lp(_)
                | Error::HullInfeasible
                | Error::FlowResidual { .. }
                | Error::Contract(_) => 3,
                _ => 1,
            },
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Args, Debug)]
pub struct SolveExactArgs {
    /// MDP JSON document.
    pub mdp: PathBuf,
    /// Reward spec JSON document.
    pub reward: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Engine for minimizations over the reward polytope.
    #[arg(long, default_value = "accpm")]
    pub method: CutMethod,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveFplArgs {
    /// MDP JSON document.
    pub mdp: PathBuf,
    /// Reward spec JSON document.
    pub reward: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Average the last this many policies (default: all).
    #[arg(long)]
    pub tail: Option<usize>,
    /// Slack c of the approximate-planner variant; positive values use the
    /// synthetic suboptimal planner.
    #[arg(long, default_value_t = 0.0)]
    pub approx_eta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub xi: f64,
    #[arg(long, default_value = "accpm")]
    pub method: CutMethod,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GridworldArgs {
    /// ExperimentConfig JSON (default: desk-scale parameters).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// 50×50 maps and 5000 rounds.
    #[arg(long)]
    pub paper_scale: bool,
    /// Slip probability override (0.1 for the stochastic model).
    #[arg(long)]
    pub slip: Option<f64>,
    /// Worker threads across seeds.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// MDP JSON document.
    pub mdp: PathBuf,
    /// Reward spec JSON document.
    pub reward: PathBuf,
    /// Policy JSON: action table, distribution table, or a saved policy/mixture.
    pub policy: PathBuf,
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    #[arg(long, default_value = "accpm")]
    pub method: CutMethod,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_problem(mdp: &Path, reward: &Path) -> CliResult<(Arc<maxmin_core::mdp::Mdp>, maxmin_core::reward::RewardSpec)> {
    let mdp = Arc::new(load_mdp(mdp)?);
    let spec = load_reward_spec(reward, Some(&mdp))?;
    Ok((mdp, spec))
}

pub fn solve_exact(a: &SolveExactArgs, tol: &Tolerances, argv: &[String]) -> CliResult {
    let mut manifest = ManifestBuilder::start("solve-exact", argv);
    let (mdp, spec) = load_problem(&a.mdp, &a.reward)?;
    let opts = ExactOptions {
        eps: a.eps,
        method: a.method,
        tol: tol.clone(),
        record_queries: false,
    };
    let sol = solve_maxmin_exact(&mdp, &spec, &opts)?;
    let path = a.out.join("solution.json");
    write_json_atomic(&path, &sol)?;
    println!("value {:.6}", sol.value);
    println!("mu_star {:?}", sol.mu_star.as_slice());
    println!("worst_weight {:?}", sol.worst_weight);
    manifest.output(&path).finish(&a.out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct FplSolution {
    policy: MixedPolicy,
    mu: FeatureExpectation,
    worst_case: WorstCase,
    regret_bound: f64,
    regret: RegretCheck,
    iterations: usize,
    seed: u64,
    tail_window: usize,
    delta: f64,
    approx_c: f64,
}

pub fn solve_fpl(a: &SolveFplArgs, tol: &Tolerances, argv: &[String]) -> CliResult {
    let mut manifest = ManifestBuilder::start("solve-fpl", argv);
    manifest.seed(a.seed);
    let (mdp, spec) = load_problem(&a.mdp, &a.reward)?;
    let cfg = FplConfig {
        tail_window: a.tail,
        method: a.method,
        xi: a.xi,
        tol: tol.clone(),
        ..FplConfig::new(a.iters, a.seed)
    };
    if !(a.approx_eta >= 0.0) {
        return Err(CliError::Usage(format!("--approx-eta must be nonnegative, got {}", a.approx_eta)));
    }
    let (mix, trace) = if a.approx_eta > 0.0 {
        fpl_solve_approx(&mdp, &SyntheticSuboptimalSolver::new(), &spec, &cfg, a.approx_eta)?
    } else {
        fpl_solve(&mdp, &spec, &cfg)?
    };
    let worst_case = evaluate_worst_case(&mdp, &spec, &mix.clone().into(), tol.reward_eps, a.method)?;
    let solution = FplSolution {
        mu: mixed_feature_expectation(&mdp, &mix)?,
        regret: regret_check(&mdp, &spec, &trace, a.xi, a.method)?,
        regret_bound: regret_bound(mdp.k(), a.iters, a.xi),
        policy: mix,
        worst_case,
        iterations: a.iters,
        seed: a.seed,
        tail_window: trace.tail_window,
        delta: trace.delta,
        approx_c: a.approx_eta,
    };
    let sol_path = a.out.join("solution.json");
    write_json_atomic(&sol_path, &solution)?;
    let trace_path = a.out.join("trace.jsonl");
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf)?;
    write_atomic(&trace_path, &buf)?;
    println!("worst-case value {:.6}", solution.worst_case.value);
    println!("regret bound {:.6}", solution.regret_bound);
    manifest.output(&sol_path).output(&trace_path).finish(&a.out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct GridworldSummary {
    seeds: Vec<u64>,
    slip: f64,
    mean_fractions: MeanFractions,
}

#[derive(Debug, Serialize)]
struct MeanFractions {
    maxmin: Vec<f64>,
    expert: Vec<f64>,
    baseline: Vec<f64>,
}

fn mean_of(reports: &[ExperimentReport], pick: impl Fn(&ExperimentReport) -> &Vec<f64>) -> Vec<f64> {
    let n = pick(&reports[0]).len();
    let mut out = vec![0.0; n];
    for r in reports {
        out.iter_mut().zip(pick(r)).for_each(|(a, b)| *a += b);
    }
    out.iter_mut().for_each(|a| *a /= reports.len() as f64);
    out
}

pub fn gridworld(a: &GridworldArgs, argv: &[String]) -> CliResult {
    let mut manifest = ManifestBuilder::start("gridworld", argv);
    manifest.config(a.config.as_deref()).extra("paper_scale", a.paper_scale);
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None if a.paper_scale => ExperimentConfig::paper_scale(),
        None => ExperimentConfig::default(),
    };
    if a.paper_scale && a.config.is_some() {
        let full = ExperimentConfig::paper_scale();
        cfg.test_size = full.test_size;
        cfg.fpl_iterations = full.fpl_iterations;
    }
    if let Some(s) = a.slip {
        cfg.slip = s;
    }
    if let Some(seed) = a.seed {
        cfg.seeds = vec![seed];
        manifest.seed(seed);
    }
    cfg.validate()?;
    if cfg.seeds.is_empty() {
        return Err(CliError::Usage("no seeds to run".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let reports: Vec<ExperimentReport> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_experiment(&cfg, seed))
            .collect::<Result<_, _>>()
    })?;
    for r in &reports {
        let path = a.out.join(format!("report-seed{}.json", r.seed));
        write_json_atomic(&path, r)?;
        manifest.output(&path);
        let render = format!(
            "maxmin\n{}\nexpert (demo map)\n{}\nbaseline\n{}",
            r.maxmin.render, r.expert.render, r.baseline.render
        );
        let path = a.out.join(format!("render-seed{}.txt", r.seed));
        write_atomic(&path, render.as_bytes())?;
        manifest.output(&path);
        print!("{}", fraction_table(r));
    }
    let summary = GridworldSummary {
        seeds: cfg.seeds.clone(),
        slip: cfg.slip,
        mean_fractions: MeanFractions {
            maxmin: mean_of(&reports, |r| &r.maxmin.terrain_fractions),
            expert: mean_of(&reports, |r| &r.expert.terrain_fractions),
            baseline: mean_of(&reports, |r| &r.baseline.terrain_fractions),
        },
    };
    let path = a.out.join("summary.json");
    write_json_atomic(&path, &summary)?;
    manifest.output(&path);
    let used = a.out.join("config.json");
    write_json_atomic(&used, &cfg)?;
    manifest.output(&used).finish(&a.out)?;
    Ok(())
}

pub fn eval(a: &EvalArgs, _tol: &Tolerances, argv: &[String]) -> CliResult {
    let mut manifest = ManifestBuilder::start("eval", argv);
    let (mdp, spec) = load_problem(&a.mdp, &a.reward)?;
    let policy = load_policy(&a.policy)?;
    let wc = evaluate_worst_case(&mdp, &spec, &policy, a.eps, a.method)?;
    let path = a.out.join("eval.json");
    write_json_atomic(&path, &wc)?;
    println!("worst-case value {:.6}", wc.value);
    println!("witness {:?}", wc.witness);
    manifest.output(&path).finish(&a.out)?;
    Ok(())
}
