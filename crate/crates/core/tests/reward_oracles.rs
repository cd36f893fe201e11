use std::sync::Arc;

use approx::assert_abs_diff_eq;
use maxmin_core::config::CutMethod;
use maxmin_core::convex::{Halfspace, SeparationResponse};
use maxmin_core::exact::BruteForceMembership;
use maxmin_core::fixtures::{random_mdp, two_route_expert_mu, two_route_expert_only_spec, two_route_mdp};
use maxmin_core::mdp::FeatureExpectation;
use maxmin_core::reward::{min_over_reward, so_reward, Expert, RewardSpec};
use proptest::prelude::*;

#[test]
fn expert_accepts_weight_within_tolerance() {
    let spec = two_route_expert_only_spec(25.0).unwrap();
    // Bottom earns 90 against the expert's 70 under w = (0, 1): gap 20 ≤ 25.
    assert_eq!(so_reward(&spec, &[0.0, 1.0], 1e-9).unwrap(), SeparationResponse::Inside);
}

#[test]
fn expert_cut_uses_best_response_features() {
    let spec = two_route_expert_only_spec(10.0).unwrap();
    let resp = so_reward(&spec, &[0.0, 1.0], 1e-9).unwrap();
    let cut = resp.cut().expect("gap 20 exceeds 10");
    assert_abs_diff_eq!(cut.normal[0], -10.0, epsilon = 1e-6);
    assert_abs_diff_eq!(cut.normal[1], 20.0, epsilon = 1e-6);
    assert_abs_diff_eq!(cut.offset, 10.0, epsilon = 1e-12);
    assert_abs_diff_eq!(cut.violation(&[0.0, 1.0]), 10.0, epsilon = 1e-6);
}

#[test]
fn explicit_cut_is_the_violated_halfspace() {
    let h = Halfspace::new(vec![-1.0, 0.0], 0.0).unwrap();
    let spec = RewardSpec::explicit(2, vec![h.clone()]).unwrap();
    assert_eq!(so_reward(&spec, &[0.5, 0.0], 1e-9).unwrap(), SeparationResponse::Inside);
    let resp = so_reward(&spec, &[-0.5, 0.0], 1e-9).unwrap();
    assert_eq!(resp.cut().unwrap().normal, h.normal);
}

#[test]
fn box_cut_outside_unit_box() {
    let spec = RewardSpec::explicit(2, vec![]).unwrap();
    let resp = so_reward(&spec, &[1.5, 0.0], 1e-9).unwrap();
    assert!(resp.cut().unwrap().violation(&[1.5, 0.0]) > 0.0);
}

#[test]
fn minimum_over_bare_box_is_a_corner() {
    let spec = RewardSpec::explicit(2, vec![]).unwrap();
    for method in [CutMethod::Accpm, CutMethod::Ellipsoid] {
        let r = min_over_reward(&spec, &[1.0, 1.0], 1e-7, method).unwrap();
        assert_abs_diff_eq!(r.value, -2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.w[0], -1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(r.w[1], -1.0, epsilon = 1e-4);
    }
}

#[test]
fn pinned_coordinates_are_respected() {
    let spec = RewardSpec::explicit(3, vec![]).unwrap().with_pinned(vec![(2, 0.25)]).unwrap();
    let r = min_over_reward(&spec, &[1.0, -1.0, 5.0], 1e-7, CutMethod::Accpm).unwrap();
    assert_eq!(r.w[2], 0.25);
    assert_abs_diff_eq!(r.value, -2.0 + 1.25, epsilon = 1e-5);
}

#[test]
fn duplicated_expert_leaves_the_polytope_unchanged() {
    let task = Arc::new(two_route_mdp());
    let one = RewardSpec::expert_additive(task.clone(), two_route_expert_mu(), 25.0).unwrap();
    let two = RewardSpec::multi_expert(vec![
        Expert::additive(task.clone(), two_route_expert_mu(), 25.0),
        Expert::additive(task, two_route_expert_mu(), 25.0),
    ])
    .unwrap();
    for dir in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5]] {
        let a = min_over_reward(&one, &dir, 1e-7, CutMethod::Accpm).unwrap();
        let b = min_over_reward(&two, &dir, 1e-7, CutMethod::Accpm).unwrap();
        assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-5);
    }
}

#[test]
fn accpm_and_ellipsoid_agree_on_expert_polytope() {
    let spec = two_route_expert_only_spec(10.0).unwrap();
    let dir = [90.0, 90.0];
    let a = min_over_reward(&spec, &dir, 1e-6, CutMethod::Accpm).unwrap();
    let e = min_over_reward(&spec, &dir, 1e-6, CutMethod::Ellipsoid).unwrap();
    assert_abs_diff_eq!(a.value, e.value, epsilon = 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Every cut must keep P_R on its feasible side, checked against enumeration.
    #[test]
    fn expert_cuts_never_remove_members(seed in 0u64..1000, w0 in -1.0f64..1.0, w1 in -1.0f64..1.0) {
        let task = Arc::new(random_mdp(3, 2, 2, 0.9, seed));
        let mu_e = FeatureExpectation(vec![5.0, 5.0]);
        let spec = RewardSpec::expert_additive(task, mu_e, 0.5).unwrap();
        let member = BruteForceMembership::new(&spec).unwrap();
        let resp = so_reward(&spec, &[w0, w1], 1e-9).unwrap();
        let v = member.violation(&[w0, w1]);
        if resp.is_inside() { prop_assert!(v <= 1e-6); } else { prop_assert!(v > -1e-6); }
        if let Some(cut) = resp.cut() {
            for i in 0..=10 {
                for j in 0..=10 {
                    let w = [-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64];
                    if member.violation(&w) <= 0.0 {
                        prop_assert!(cut.violation(&w) <= 1e-6);
                    }
                }
            }
        }
    }
}
