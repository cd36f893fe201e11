use maxmin_core::exact::evaluate_worst_case;
use maxmin_core::fixtures::{random_mdp, two_route_mdp, two_route_policy, two_route_spec, TOP};
use maxmin_core::io::{load_mdp, load_policy, load_reward_spec, save_mdp, save_policy, save_reward_spec, MdpDoc};
use maxmin_core::mdp::{AnyPolicy, Policy};
use tempfile::TempDir;

#[test]
fn mdp_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("mdp.json");
    let mdp = random_mdp(4, 3, 2, 0.9, 5);
    save_mdp(&path, &mdp).unwrap();
    assert_eq!(load_mdp(&path).unwrap(), mdp);
    assert!(std::fs::read_to_string(&path).unwrap().ends_with("}\n"));
}

#[test]
fn reward_spec_round_trip_preserves_worst_case() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("reward.json");
    let spec = two_route_spec(25.0).unwrap();
    save_reward_spec(&path, &spec).unwrap();
    let back = load_reward_spec(&path, None).unwrap();
    let top = AnyPolicy::Single(two_route_policy(TOP));
    let mdp = two_route_mdp();
    let a = evaluate_worst_case(&mdp, &spec, &top, 1e-7, Default::default()).unwrap();
    let b = evaluate_worst_case(&mdp, &back, &top, 1e-7, Default::default()).unwrap();
    assert!((a.value - b.value).abs() < 1e-9);
}

#[test]
fn expert_given_by_relative_policy_file() {
    let dir = TempDir::new().unwrap();
    save_mdp(&dir.path().join("task.json"), &two_route_mdp()).unwrap();
    std::fs::write(dir.path().join("expert.json"), "[0, 0, 0]").unwrap();
    let reward = dir.path().join("reward.json");
    std::fs::write(
        &reward,
        r#"{"k": 2, "experts": [{"policy_file": "expert.json", "task_file": "task.json", "epsilon": 25}]}"#,
    )
    .unwrap();
    let spec = load_reward_spec(&reward, None).unwrap();
    let mu = &spec.experts()[0].mu_e;
    assert!((mu.0[0] - 100.0).abs() < 1e-6 && (mu.0[1] - 70.0).abs() < 1e-6);
}

#[test]
fn expert_needs_exactly_one_demonstration() {
    let dir = TempDir::new().unwrap();
    let reward = dir.path().join("reward.json");
    std::fs::write(&reward, r#"{"k": 2, "experts": [{"mu_e": [1, 1], "policy": [0, 0, 0], "epsilon": 1}]}"#).unwrap();
    let mdp = std::sync::Arc::new(two_route_mdp());
    assert!(load_reward_spec(&reward, Some(&mdp)).is_err());
    std::fs::write(&reward, r#"{"k": 2, "experts": [{"mu_e": [1, 1], "epsilon": 1}]}"#).unwrap();
    assert!(load_reward_spec(&reward, None).is_err(), "task is required without a planning MDP");
}

#[test]
fn policy_formats() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, "[1, 0, 0]").unwrap();
    assert_eq!(load_policy(&path).unwrap(), AnyPolicy::Single(Policy::Deterministic(vec![1, 0, 0])));
    std::fs::write(&path, "[[0.5, 0.5], [1, 0]]").unwrap();
    assert_eq!(
        load_policy(&path).unwrap(),
        AnyPolicy::Single(Policy::Stochastic(vec![vec![0.5, 0.5], vec![1.0, 0.0]]))
    );
    let tagged = AnyPolicy::Single(Policy::Stochastic(vec![vec![0.25, 0.75]]));
    save_policy(&path, &tagged).unwrap();
    assert_eq!(load_policy(&path).unwrap(), tagged);
}

#[test]
fn unknown_fields_and_ragged_tables_are_rejected() {
    let mut doc = MdpDoc::from_mdp(&two_route_mdp());
    let mut v = serde_json::to_value(&doc).unwrap();
    v["reward"] = serde_json::json!([1]);
    assert!(serde_json::from_value::<MdpDoc>(v).is_err());
    doc.transition[1].pop();
    assert!(doc.to_mdp().is_err());
}
