use approx::assert_abs_diff_eq;
use maxmin_core::gridworld::{
    build_mdp, goal_reachable_avoiding, make_test_grid, render_trajectory, terrain_fractions, ExperimentConfig,
    GridSpec,
};
use maxmin_core::mdp::{solve_mdp, AnyPolicy, Policy};
use proptest::prelude::*;

const RIGHT: usize = 3;
const DOWN: usize = 1;

fn grid(width: usize, height: usize, terrain: Vec<usize>, n_terrain: usize) -> GridSpec {
    GridSpec {
        width,
        height,
        terrain,
        goal: (height - 1, width - 1),
        slip: 0.0,
        n_terrain,
        gamma: 0.95,
        terrain_feature: 1.0,
        start_cells: None,
    }
}

#[test]
fn one_step_to_goal() {
    // Start next to the goal on free terrain: value is γ times the goal reward.
    let g = grid(2, 1, vec![0, 0], 1);
    let plan = solve_mdp(&build_mdp(&g).unwrap(), &[0.0, 10.0], 1e-10).unwrap();
    assert_abs_diff_eq!(plan.value, 9.5, epsilon = 1e-8);
    assert_eq!(plan.policy.prob(0, RIGHT), 1.0);
}

#[test]
fn slip_splits_mass_over_moves() {
    let g = GridSpec { slip: 0.1, ..grid(2, 1, vec![0, 0], 1) };
    let mdp = build_mdp(&g).unwrap();
    let to_goal: f64 = mdp.successors(0, RIGHT).iter().filter(|(j, _)| *j == 1).map(|(_, p)| p).sum();
    assert_abs_diff_eq!(to_goal, 0.925, epsilon = 1e-15);
    // V = γ(p·10 + (1 - p)V) from the start cell.
    let plan = solve_mdp(&mdp, &[0.0, 10.0], 1e-10).unwrap();
    let p = 0.925;
    assert_abs_diff_eq!(plan.value, 10.0 * 0.95 * p / (1.0 - 0.95 * (1.0 - p)), epsilon = 1e-7);
}

fn corner_walk() -> (GridSpec, AnyPolicy) {
    let g = GridSpec {
        start_cells: Some(vec![(0, 0)]),
        ..grid(2, 2, vec![0, 1, 2, 0], 3)
    };
    (g, AnyPolicy::Single(Policy::Deterministic(vec![RIGHT, DOWN, 0, 0, 0])))
}

#[test]
fn render_marks_path_and_goal() {
    let (g, policy) = corner_walk();
    assert_eq!(render_trajectory(&g, &policy, 0, 10).unwrap(), "**\n3G\n");
}

#[test]
fn fractions_follow_discounted_visits() {
    let (g, policy) = corner_walk();
    let f = terrain_fractions(&g, &build_mdp(&g).unwrap(), &policy).unwrap();
    assert_abs_diff_eq!(f[0], 1.0 / 1.95, epsilon = 1e-12);
    assert_abs_diff_eq!(f[1], 0.95 / 1.95, epsilon = 1e-12);
    assert_eq!(f[2], 0.0);
}

#[test]
fn wall_of_forbidden_terrain_blocks_the_goal() {
    let g = grid(3, 3, vec![0, 1, 0, 1, 1, 0, 0, 0, 0], 2);
    assert!(goal_reachable_avoiding(&g, None));
    assert!(!goal_reachable_avoiding(&g, Some(1)));
    let g = GridSpec { start_cells: Some(vec![(0, 2)]), ..g };
    assert!(goal_reachable_avoiding(&g, Some(1)));
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(build_mdp(&grid(2, 1, vec![0], 1)).is_err());
    assert!(build_mdp(&grid(2, 1, vec![0, 3], 1)).is_err());
    assert!(build_mdp(&GridSpec { slip: 1.0, ..grid(2, 1, vec![0, 0], 1) }).is_err());
}

#[test]
fn test_maps_are_feasibility_filtered() {
    let cfg = ExperimentConfig::default();
    for seed in 0..5 {
        let g = make_test_grid(&cfg, seed).unwrap();
        assert_eq!(g.width, cfg.test_size);
        assert!(goal_reachable_avoiding(&g, Some(cfg.unknown_terrain())));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fractions_sum_to_one(seed in 0u64..10_000, slip in 0.0f64..0.5) {
        let cfg = ExperimentConfig { test_size: 5, ..ExperimentConfig::default() };
        let g = GridSpec { slip, ..make_test_grid(&cfg, seed).unwrap() };
        let mdp = build_mdp(&g).unwrap();
        let w: Vec<f64> = (0..g.k()).map(|j| if j == g.n_terrain { 1.0 } else { -0.1 * j as f64 }).collect();
        let plan = solve_mdp(&mdp, &w, 1e-9).unwrap();
        let f = terrain_fractions(&g, &mdp, &AnyPolicy::Single(plan.policy)).unwrap();
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(f.iter().all(|v| *v >= 0.0));
    }
}
