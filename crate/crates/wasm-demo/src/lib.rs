//! Browser bindings. Every entry point takes and returns JSON strings so the
//! page stays framework-free; the `*_json` functions are plain Rust and are
//! what the native tests exercise.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use maxmin_core::config::CutMethod;
use maxmin_core::exact::{evaluate_worst_case, solve_maxmin_exact, ExactOptions, MaxminSolution};
use maxmin_core::fixtures::{two_route_mdp, two_route_spec};
use maxmin_core::fpl::{fpl_solve, regret_bound, FplConfig};
use maxmin_core::gridworld::{fraction_table, run_experiment, ExperimentConfig};
use maxmin_core::io::{MdpDoc, RewardSpecDoc};
use maxmin_core::mdp::{mixed_feature_expectation, AnyPolicy, Mdp, MixedPolicy};
use maxmin_core::reward::RewardSpec;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse(mdp: &str, reward: &str) -> Result<(Arc<Mdp>, RewardSpec), String> {
    let mdp: MdpDoc = serde_json::from_str(mdp).map_err(|e| format!("MDP: {e}"))?;
    let mdp = Arc::new(mdp.to_mdp().map_err(err)?);
    let doc: RewardSpecDoc = serde_json::from_str(reward).map_err(|e| format!("reward spec: {e}"))?;
    // File references cannot be resolved in the browser; inline documents only.
    let spec = doc.to_spec(Some(&mdp), std::path::Path::new("")).map_err(err)?;
    Ok((mdp, spec))
}

/// The two-route example as `{"mdp": ..., "reward": ...}` documents.
pub fn two_route_documents_json(epsilon: f64) -> Result<String, String> {
    let spec = two_route_spec(epsilon).map_err(err)?;
    serde_json::to_string_pretty(&serde_json::json!({
        "mdp": MdpDoc::from_mdp(&two_route_mdp()),
        "reward": RewardSpecDoc::from_spec(&spec),
    }))
    .map_err(err)
}

pub fn solve_exact_json(mdp: &str, reward: &str) -> Result<String, String> {
    let (mdp, spec) = parse(mdp, reward)?;
    let sol: MaxminSolution = solve_maxmin_exact(&mdp, &spec, &ExactOptions::default()).map_err(err)?;
    serde_json::to_string_pretty(&sol).map_err(err)
}

#[derive(Serialize)]
struct FplSummary {
    worst_case: f64,
    regret_bound: f64,
    mu: Vec<f64>,
    policy: MixedPolicy,
    /// Cumulative average of the played feature vectors, one entry per round.
    running_mu: Vec<Vec<f64>>,
}

pub fn solve_fpl_json(mdp: &str, reward: &str, iterations: usize, seed: u64) -> Result<String, String> {
    let (mdp, spec) = parse(mdp, reward)?;
    let (mix, trace) = fpl_solve(&mdp, &spec, &FplConfig::new(iterations, seed)).map_err(err)?;
    let wc = evaluate_worst_case(&mdp, &spec, &AnyPolicy::Mixed(mix.clone()), 1e-7, CutMethod::Accpm).map_err(err)?;
    let mut sum = vec![0.0; mdp.k()];
    let running_mu = trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            sum.iter_mut().zip(r.mu.as_slice()).for_each(|(s, m)| *s += m);
            sum.iter().map(|s| s / (i + 1) as f64).collect()
        })
        .collect();
    let summary = FplSummary {
        worst_case: wc.value,
        regret_bound: regret_bound(mdp.k(), iterations, 0.05),
        mu: mixed_feature_expectation(&mdp, &mix).map_err(err)?.0,
        policy: mix,
        running_mu,
    };
    serde_json::to_string(&summary).map_err(err)
}

#[derive(Serialize)]
struct GridSummary {
    table: String,
    maxmin_render: String,
    baseline_render: String,
    expert_render: String,
    maxmin_fractions: Vec<f64>,
    baseline_fractions: Vec<f64>,
}

/// A small gridworld run sized for the browser.
pub fn gridworld_json(seed: u64, slip: f64, size: usize, iterations: usize) -> Result<String, String> {
    let cfg = ExperimentConfig {
        demo_size: size.min(10),
        test_size: size,
        fpl_iterations: iterations,
        slip,
        seeds: vec![seed],
        ..ExperimentConfig::default()
    };
    cfg.validate().map_err(err)?;
    let r = run_experiment(&cfg, seed).map_err(err)?;
    serde_json::to_string(&GridSummary {
        table: fraction_table(&r),
        maxmin_render: r.maxmin.render.clone(),
        baseline_render: r.baseline.render.clone(),
        expert_render: r.expert.render.clone(),
        maxmin_fractions: r.maxmin.terrain_fractions.clone(),
        baseline_fractions: r.baseline.terrain_fractions.clone(),
    })
    .map_err(err)
}

#[wasm_bindgen(js_name = twoRouteDocuments)]
pub fn two_route_documents(epsilon: f64) -> Result<String, JsValue> {
    two_route_documents_json(epsilon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = solveExact)]
pub fn solve_exact(mdp: &str, reward: &str) -> Result<String, JsValue> {
    solve_exact_json(mdp, reward).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = solveFpl)]
pub fn solve_fpl(mdp: &str, reward: &str, iterations: usize, seed: u32) -> Result<String, JsValue> {
    solve_fpl_json(mdp, reward, iterations, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = gridworld)]
pub fn gridworld(seed: u32, slip: f64, size: usize, iterations: usize) -> Result<String, JsValue> {
    gridworld_json(seed as u64, slip, size, iterations).map_err(|e| JsValue::from_str(&e))
}
