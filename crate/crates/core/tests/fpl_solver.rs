use approx::assert_abs_diff_eq;
use maxmin_core::config::CutMethod;
use maxmin_core::exact::evaluate_worst_case;
use maxmin_core::fixtures::{two_route_expert_only_spec, two_route_mdp, two_route_spec};
use maxmin_core::fpl::{
    fpl_solve, fpl_solve_approx, regret_allowance, regret_bound, regret_check, FplConfig, SyntheticSuboptimalSolver,
};
use maxmin_core::mdp::{mixed_feature_expectation, ExactSolver, MdpSolver};
use proptest::prelude::*;

#[test]
fn bound_formula() {
    assert_abs_diff_eq!(regret_bound(1, 1, (-1.0f64).exp()), 10.0, epsilon = 1e-12);
    let expected = 4.0 * (6.0 + 4.0 * 20f64.ln().sqrt()) / 20.0;
    assert_abs_diff_eq!(regret_bound(2, 400, 0.05), expected, epsilon = 1e-12);
    assert_abs_diff_eq!(regret_allowance(2, 400, 0.05), 4.0 * 20.0 * (3.0 + 2.0 * 20f64.ln().sqrt()), epsilon = 1e-9);
}

proptest! {
    #[test]
    fn bound_decreases_in_rounds(k in 1usize..6, t in 1usize..10_000, xi in 0.001f64..0.49) {
        prop_assert!(regret_bound(k, t + 1, xi) < regret_bound(k, t, xi));
    }
}

#[test]
fn single_round_gives_one_deterministic_policy() {
    let mdp = two_route_mdp();
    let spec = two_route_spec(25.0).unwrap();
    let (mix, trace) = fpl_solve(&mdp, &spec, &FplConfig::new(1, 3)).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert_eq!(mix.components.len(), 1);
    assert_eq!(mix.components[0].0, 1.0);
}

#[test]
fn trace_invariants_and_reproducibility() {
    let mdp = two_route_mdp();
    let spec = two_route_spec(25.0).unwrap();
    let cfg = FplConfig::new(60, 11).with_tail_fraction(0.5);
    let (mix, trace) = fpl_solve(&mdp, &spec, &cfg).unwrap();
    assert_eq!(trace.records.len(), 60);
    assert_eq!(trace.tail_window, 30);
    let bound = 1.0 / trace.delta;
    for r in &trace.records {
        assert!(r.p.iter().chain(&r.q).all(|v| (0.0..=bound).contains(v)));
    }
    let mean = trace.tail_mean_mu();
    let mixed = mixed_feature_expectation(&mdp, &mix).unwrap();
    for (a, b) in mean.as_slice().iter().zip(mixed.as_slice()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
    let (_, again) = fpl_solve(&mdp, &spec, &cfg).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    trace.write_jsonl(&mut x).unwrap();
    again.write_jsonl(&mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn two_route_output_is_near_maxmin() {
    let mdp = two_route_mdp();
    let spec = two_route_spec(25.0).unwrap();
    let slack = regret_bound(2, 400, 0.05);
    let mut passes = 0;
    for seed in 0..5 {
        let (mix, trace) = fpl_solve(&mdp, &spec, &FplConfig::new(400, seed)).unwrap();
        let wc = evaluate_worst_case(&mdp, &spec, &mix.into(), 1e-7, CutMethod::Accpm).unwrap();
        if wc.value >= 90.0 - slack {
            passes += 1;
        }
        let rc = regret_check(&mdp, &spec, &trace, 0.05, CutMethod::Accpm).unwrap();
        assert!(rc.designer_ok && rc.agent_ok, "{rc:?}");
    }
    assert!(passes >= 4, "{passes}/5");
}

#[test]
fn exact_planner_in_approx_variant_reproduces_plain_fpl() {
    let mdp = two_route_mdp();
    let spec = two_route_expert_only_spec(25.0).unwrap();
    let cfg = FplConfig::new(40, 5);
    let (_, plain) = fpl_solve(&mdp, &spec, &cfg).unwrap();
    let (_, approx) = fpl_solve_approx(&mdp, &ExactSolver::default(), &spec, &cfg, 0.0).unwrap();
    for (a, b) in plain.records.iter().zip(&approx.records) {
        assert_eq!((&a.w, &a.mu, &a.policy, &a.p, &a.q), (&b.w, &b.mu, &b.policy, &b.p, &b.q));
    }
}

#[test]
fn synthetic_solver_returns_second_best_within_accuracy() {
    let mdp = two_route_mdp();
    let solver = SyntheticSuboptimalSolver::new();
    // Under w = (0, 1): bottom earns 90, top 70.
    let exact = solver.solve(&mdp, &[0.0, 1.0], 0.0).unwrap();
    assert_abs_diff_eq!(exact.value, 90.0, epsilon = 1e-9);
    let sloppy = solver.solve(&mdp, &[0.0, 1.0], 20.0).unwrap();
    assert_abs_diff_eq!(sloppy.value, 70.0, epsilon = 1e-9);
}

#[test]
fn approx_variant_with_synthetic_solver_stays_in_polytope() {
    let mdp = two_route_mdp();
    let spec = two_route_expert_only_spec(25.0).unwrap();
    let solver = SyntheticSuboptimalSolver::new();
    let (_, trace) = fpl_solve_approx(&mdp, &solver, &spec, &FplConfig::new(50, 2), 0.5).unwrap();
    assert_eq!(trace.records.len(), 50);
}

#[test]
fn approx_variant_rejects_mixed_specs() {
    let mdp = two_route_mdp();
    let spec = two_route_spec(25.0).unwrap();
    let err = fpl_solve_approx(&mdp, &ExactSolver::default(), &spec, &FplConfig::new(5, 0), 0.5).unwrap_err();
    assert!(matches!(err, maxmin_core::error::Error::InvalidRewardSpec(_)));
}
