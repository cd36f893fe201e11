use maxmin_wasm_demo::{gridworld_json, solve_exact_json, solve_fpl_json, two_route_documents_json};
use serde_json::Value;

fn docs() -> (String, String) {
    let v: Value = serde_json::from_str(&two_route_documents_json(25.0).unwrap()).unwrap();
    (v["mdp"].to_string(), v["reward"].to_string())
}

#[test]
fn exact_on_two_route_documents() {
    let (mdp, reward) = docs();
    let sol: Value = serde_json::from_str(&solve_exact_json(&mdp, &reward).unwrap()).unwrap();
    assert!((sol["value"].as_f64().unwrap() - 90.0).abs() < 1e-4);
}

#[test]
fn fpl_reports_running_average_per_round() {
    let (mdp, reward) = docs();
    let r: Value = serde_json::from_str(&solve_fpl_json(&mdp, &reward, 50, 1).unwrap()).unwrap();
    assert_eq!(r["running_mu"].as_array().unwrap().len(), 50);
    assert!(r["worst_case"].as_f64().unwrap() <= 90.0 + 1e-6);
}

#[test]
fn malformed_documents_are_reported() {
    let (_, reward) = docs();
    let e = solve_exact_json("{\"n_states\": 2}", &reward).unwrap_err();
    assert!(e.starts_with("MDP:"), "{e}");
}

#[test]
fn small_gridworld_renders() {
    let r: Value = serde_json::from_str(&gridworld_json(2, 0.0, 6, 20).unwrap()).unwrap();
    assert!(r["maxmin_render"].as_str().unwrap().contains('G'));
    let total: f64 = r["maxmin_fractions"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}
