//! Numeric tolerances shared by every solver layer.

use serde::{Deserialize, Serialize};

/// Which cutting-plane engine minimizes linear objectives over the reward polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CutMethod {
    Ellipsoid,
    #[default]
    Accpm,
}

impl std::str::FromStr for CutMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ellipsoid" => Ok(CutMethod::Ellipsoid),
            "accpm" => Ok(CutMethod::Accpm),
            other => Err(format!("unknown cut method `{other}` (expected ellipsoid|accpm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Value accuracy of the exact MDP solver.
    pub mdp_tol: f64,
    /// Objective accuracy of the outer maxmin solve.
    pub maxmin_eps: f64,
    /// Objective accuracy of minimizations over the reward polytope.
    pub reward_eps: f64,
    /// Iteration cap of a single ellipsoid feasibility run.
    pub ellipsoid_max_iters: usize,
    /// Iteration cap of an analytic-center cutting-plane solve.
    pub accpm_max_iters: usize,
    /// Newton-decrement target of the analytic-center iteration.
    pub newton_tol: f64,
    /// Step cap of the analytic-center Newton iteration.
    pub newton_max_steps: usize,
    /// Feasibility and optimality tolerance of the dense simplex solver.
    pub lp_tol: f64,
    /// Strictness slack applied when checking that a returned cut separates.
    pub cut_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mdp_tol: 1e-10,
            maxmin_eps: 1e-5,
            reward_eps: 1e-7,
            ellipsoid_max_iters: 20_000,
            accpm_max_iters: 500,
            newton_tol: 1e-8,
            newton_max_steps: 200,
            lp_tol: 1e-9,
            cut_slack: 1e-12,
        }
    }
}
