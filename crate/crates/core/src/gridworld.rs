//! Terrain gridworlds and the unknown-terrain avoidance experiment.
//!
//! An expert demonstrates in a small map that lacks one terrain type. The
//! maxmin learner then acts in a larger map that contains it. Since the
//! demonstration says nothing about the missing terrain, its weight ranges over
//! all of `[-1, 1]` in `P_R`, and a maxmin policy stays off it.
//!
//! Terrain indicators take the value `1/goal_reward` and the goal weight is
//! pinned at 1. Every reward is thus divided by the goal reward while terrain
//! weights keep their natural scale inside the unit box.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CutMethod, Tolerances};
use crate::error::{Error, Result};
use crate::exact::evaluate_worst_case;
use crate::fpl::{fpl_solve, FplConfig};
use crate::mdp::{
    dot, feature_expectation, occupancy_measure, sample_index, sample_successor, solve_mdp, AnyPolicy, Mdp, Policy,
};
use crate::reward::RewardSpec;

/// Moves as `(d_row, d_col)`: up, down, left, right.
pub const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major terrain ids.
    pub terrain: Vec<usize>,
    /// `(row, col)`.
    pub goal: (usize, usize),
    /// Probability that the move is replaced by a uniformly random direction.
    #[serde(default)]
    pub slip: f64,
    pub n_terrain: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Value of the terrain indicator on a cell of that terrain.
    #[serde(default = "default_terrain_feature")]
    pub terrain_feature: f64,
    /// Cells the episode may start in; `None` means every non-goal cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_cells: Option<Vec<(usize, usize)>>,
}

fn default_gamma() -> f64 {
    0.95
}

fn default_terrain_feature() -> f64 {
    1.0
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.width == 0 || self.height == 0 {
            return bad("grid must be nonempty".into());
        }
        if self.terrain.len() != self.width * self.height {
            return bad(format!(
                "terrain has {} cells, expected {}",
                self.terrain.len(),
                self.width * self.height
            ));
        }
        if let Some(i) = self.terrain.iter().position(|&t| t >= self.n_terrain) {
            return bad(format!("terrain[{i}] = {} but n_terrain = {}", self.terrain[i], self.n_terrain));
        }
        if self.goal.0 >= self.height || self.goal.1 >= self.width {
            return bad(format!("goal {:?} outside {}x{}", self.goal, self.height, self.width));
        }
        if !(0.0..1.0).contains(&self.slip) {
            return bad(format!("slip must lie in [0, 1), got {}", self.slip));
        }
        if !(self.terrain_feature > 0.0 && self.terrain_feature <= 1.0) {
            return bad(format!("terrain_feature must lie in (0, 1], got {}", self.terrain_feature));
        }
        if let Some(cells) = &self.start_cells {
            if cells.is_empty() {
                return bad("start_cells is empty".into());
            }
            if let Some(c) = cells.iter().find(|c| c.0 >= self.height || c.1 >= self.width || **c == self.goal) {
                return bad(format!("start cell {c:?} is out of bounds or the goal"));
            }
        }
        Ok(())
    }

    pub fn cell(&self, r: usize, c: usize) -> usize {
        r * self.width + c
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn goal_index(&self) -> usize {
        self.cell(self.goal.0, self.goal.1)
    }

    /// Index of the absorbing post-goal state.
    pub fn absorbing(&self) -> usize {
        self.n_cells()
    }

    /// Feature length: one-hot terrain plus the goal indicator.
    pub fn k(&self) -> usize {
        self.n_terrain + 1
    }

    fn step(&self, s: usize, (dr, dc): (isize, isize)) -> usize {
        let (r, c) = (s / self.width, s % self.width);
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
            s
        } else {
            self.cell(nr as usize, nc as usize)
        }
    }

    fn starts(&self) -> Vec<usize> {
        match &self.start_cells {
            Some(cells) => cells.iter().map(|&(r, c)| self.cell(r, c)).collect(),
            None => (0..self.n_cells()).filter(|&s| s != self.goal_index()).collect(),
        }
    }
}

/// Cells-plus-absorbing MDP with four moves; walls are no-ops.
pub fn build_mdp(grid: &GridSpec) -> Result<Mdp> {
    grid.validate()?;
    let n = grid.n_cells() + 1;
    let (goal, absorbing, k) = (grid.goal_index(), grid.absorbing(), grid.k());
    let mut rows = Vec::with_capacity(n * 4);
    for s in 0..n {
        for &mv in &MOVES {
            if s == goal || s == absorbing {
                rows.push(vec![(absorbing, 1.0)]);
                continue;
            }
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
            let mut add = |j: usize, p: f64| match row.iter_mut().find(|(i, _)| *i == j) {
                Some(e) => e.1 += p,
                None => row.push((j, p)),
            };
            add(grid.step(s, mv), 1.0 - grid.slip);
            if grid.slip > 0.0 {
                for &other in &MOVES {
                    add(grid.step(s, other), grid.slip / 4.0);
                }
            }
            row.sort_by_key(|e| e.0);
            rows.push(row);
        }
    }
    let mut features = vec![0.0; n * k];
    for s in 0..grid.n_cells() {
        if s == goal {
            features[s * k + grid.n_terrain] = 1.0;
        } else {
            features[s * k + grid.terrain[s]] = grid.terrain_feature;
        }
    }
    let starts = grid.starts();
    let mut initial = vec![0.0; n];
    for &s in &starts {
        initial[s] = 1.0 / starts.len() as f64;
    }
    Mdp::from_sparse(4, grid.gamma, initial, rows, features, k)
}

/// Whether the goal is reachable from every start cell without entering
/// `forbidden` terrain (start cells included).
pub fn goal_reachable_avoiding(grid: &GridSpec, forbidden: Option<usize>) -> bool {
    let ok = |s: usize| s == grid.goal_index() || Some(grid.terrain[s]) != forbidden;
    let mut seen = vec![false; grid.n_cells()];
    let mut queue = VecDeque::from([grid.goal_index()]);
    seen[grid.goal_index()] = true;
    while let Some(s) = queue.pop_front() {
        for &mv in &MOVES {
            let j = grid.step(s, mv);
            if !seen[j] && ok(j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    grid.starts().into_iter().all(|s| seen[s])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub demo_size: usize,
    pub test_size: usize,
    pub demo_terrain_count: usize,
    pub test_terrain_count: usize,
    pub terrain_reward_range: (f64, f64),
    pub goal_reward: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub fpl_iterations: usize,
    pub tail_fraction: f64,
    pub seeds: Vec<u64>,
    pub baseline_unknown_range: (f64, f64),
    pub slip: f64,
    #[serde(default)]
    pub method: CutMethod,
    pub max_retries: usize,
    pub render_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            demo_size: 10,
            test_size: 15,
            demo_terrain_count: 4,
            test_terrain_count: 5,
            terrain_reward_range: (-0.5, 0.0),
            goal_reward: 10.0,
            gamma: 0.95,
            epsilon: 0.5,
            fpl_iterations: 500,
            tail_fraction: 0.5,
            seeds: (0..10).collect(),
            baseline_unknown_range: (-1.0, 0.0),
            slip: 0.0,
            method: CutMethod::default(),
            max_retries: 100,
            render_steps: 60,
        }
    }
}

impl ExperimentConfig {
    /// 50×50 test map and 5000 rounds.
    pub fn paper_scale() -> Self {
        ExperimentConfig {
            test_size: 50,
            fpl_iterations: 5000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.demo_size < 2 || self.test_size < 2 {
            return bad("map sizes must be at least 2");
        }
        if self.demo_terrain_count == 0 || self.test_terrain_count <= self.demo_terrain_count {
            return bad("test maps need more terrain types than demo maps");
        }
        if !(self.terrain_reward_range.0 <= self.terrain_reward_range.1)
            || !(self.baseline_unknown_range.0 <= self.baseline_unknown_range.1)
        {
            return bad("ranges must be ordered");
        }
        if !(self.goal_reward >= 1.0) || !(self.epsilon >= 0.0) || !(0.0..1.0).contains(&self.gamma) {
            return bad("goal_reward ≥ 1, epsilon ≥ 0 and gamma in [0, 1) are required");
        }
        let inside = |(a, b): (f64, f64)| a >= -1.0 && b <= 1.0;
        if !inside(self.terrain_reward_range) || !inside(self.baseline_unknown_range) {
            return bad("terrain reward ranges must lie in [-1, 1]");
        }
        if self.fpl_iterations == 0 || !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return bad("fpl_iterations > 0 and tail_fraction in (0, 1] are required");
        }
        if !(0.0..1.0).contains(&self.slip) {
            return bad("slip must lie in [0, 1)");
        }
        Ok(())
    }

    /// Id of the terrain absent from demonstrations.
    pub fn unknown_terrain(&self) -> usize {
        self.test_terrain_count - 1
    }
}

// Independent generator streams per purpose.
const STREAM_DEMO_MAP: u64 = 1;
const STREAM_DEMO_WEIGHTS: u64 = 2;
const STREAM_TEST_MAP: u64 = 3;
const STREAM_BASELINE: u64 = 4;
const STREAM_RENDER: u64 = 5;

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_grid<R: Rng>(rng: &mut R, size: usize, types: usize, cfg: &ExperimentConfig) -> GridSpec {
    GridSpec {
        width: size,
        height: size,
        terrain: (0..size * size).map(|_| rng.gen_range(0..types)).collect(),
        goal: (size - 1, size - 1),
        slip: cfg.slip,
        n_terrain: cfg.test_terrain_count,
        gamma: cfg.gamma,
        terrain_feature: 1.0 / cfg.goal_reward,
        start_cells: None,
    }
}

/// The demonstration side of the experiment.
#[derive(Debug, Clone)]
pub struct ExpertDemo {
    pub grid: GridSpec,
    pub mdp: Arc<Mdp>,
    pub policy: Policy,
    pub mu_e: Vec<f64>,
    /// Demo terrain weights, zero for unseen ones, goal weight 1.
    pub weights: Vec<f64>,
}

/// Samples a demo map over the known terrains and weights, and solves it.
pub fn make_expert(cfg: &ExperimentConfig, seed: u64) -> Result<ExpertDemo> {
    cfg.validate()?;
    let mut map_rng = rng_for(seed, STREAM_DEMO_MAP);
    let mut grid = None;
    for _ in 0..cfg.max_retries.max(1) {
        let g = random_grid(&mut map_rng, cfg.demo_size, cfg.demo_terrain_count, cfg);
        if goal_reachable_avoiding(&g, None) {
            grid = Some(g);
            break;
        }
    }
    let grid = grid.ok_or_else(|| Error::InvalidArgument("no demo map with a reachable goal".into()))?;
    let mut wrng = rng_for(seed, STREAM_DEMO_WEIGHTS);
    let (lo, hi) = cfg.terrain_reward_range;
    let mut weights = vec![0.0; grid.k()];
    for w in weights.iter_mut().take(cfg.demo_terrain_count) {
        *w = wrng.gen_range(lo..=hi);
    }
    weights[grid.n_terrain] = 1.0;
    let mdp = Arc::new(build_mdp(&grid)?);
    let plan = solve_mdp(&mdp, &weights, Tolerances::default().mdp_tol)?;
    let mu_e = feature_expectation(&mdp, &plan.policy)?.0;
    Ok(ExpertDemo {
        grid,
        mdp,
        policy: plan.policy,
        mu_e,
        weights,
    })
}

/// `P_R` for a demonstration: additive expert bound with the goal weight pinned.
pub fn experiment_spec(cfg: &ExperimentConfig, demo: &ExpertDemo) -> Result<RewardSpec> {
    RewardSpec::expert_additive(
        demo.mdp.clone(),
        crate::mdp::FeatureExpectation(demo.mu_e.clone()),
        cfg.epsilon / cfg.goal_reward,
    )?
    .with_pinned(vec![(demo.grid.n_terrain, 1.0)])
}

/// Test map over all terrains whose start cells avoid the unknown terrain and
/// reach the goal without entering it.
pub fn make_test_grid(cfg: &ExperimentConfig, seed: u64) -> Result<GridSpec> {
    let mut rng = rng_for(seed, STREAM_TEST_MAP);
    let unknown = cfg.unknown_terrain();
    for _ in 0..cfg.max_retries.max(1) {
        let mut g = random_grid(&mut rng, cfg.test_size, cfg.test_terrain_count, cfg);
        let starts: Vec<(usize, usize)> = (0..g.n_cells())
            .filter(|&s| s != g.goal_index() && g.terrain[s] != unknown)
            .map(|s| (s / g.width, s % g.width))
            .collect();
        if starts.is_empty() {
            continue;
        }
        g.start_cells = Some(starts);
        if goal_reachable_avoiding(&g, Some(unknown)) {
            return Ok(g);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no feasible test map within {} retries",
        cfg.max_retries
    )))
}

/// Share of occupancy on each terrain over all non-goal cells.
pub fn terrain_fractions(grid: &GridSpec, mdp: &Mdp, policy: &AnyPolicy) -> Result<Vec<f64>> {
    let comps: Vec<(f64, &Policy)> = match policy {
        AnyPolicy::Single(p) => vec![(1.0, p)],
        AnyPolicy::Mixed(m) => m.components.iter().map(|(w, p)| (*w, p)).collect(),
    };
    let mut mass = vec![0.0; grid.n_terrain];
    for (w, p) in comps {
        let occ = occupancy_measure(mdp, p)?;
        for s in 0..grid.n_cells() {
            if s != grid.goal_index() {
                mass[grid.terrain[s]] += w * occ.state_mass(s);
            }
        }
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.iter_mut().for_each(|m| *m /= total);
    }
    Ok(mass)
}

/// One rollout drawn on the map: terrain ids as digits starting at 1, `*` on
/// visited cells, `G` on the goal. A mixture picks its component first.
pub fn render_trajectory(grid: &GridSpec, policy: &AnyPolicy, seed: u64, max_steps: usize) -> Result<String> {
    let mdp = build_mdp(grid)?;
    let mut rng = rng_for(seed, STREAM_RENDER);
    let policy = match policy {
        AnyPolicy::Single(p) => p.clone(),
        AnyPolicy::Mixed(m) => {
            let i = sample_index(&mut rng, m.components.iter().map(|(w, _)| *w));
            m.components[i].1.clone()
        }
    };
    policy.validate(&mdp)?;
    let mut visited = vec![false; grid.n_cells()];
    let mut s = sample_index(&mut rng, mdp.initial_dist().iter().copied());
    for _ in 0..=max_steps {
        if s >= grid.n_cells() {
            break;
        }
        visited[s] = true;
        if s == grid.goal_index() {
            break;
        }
        let a = sample_index(&mut rng, policy.action_dist(s, 4).into_iter());
        s = sample_successor(&mut rng, mdp.successors(s, a));
    }
    let mut out = String::with_capacity(grid.n_cells() + grid.height);
    for r in 0..grid.height {
        for c in 0..grid.width {
            let s = grid.cell(r, c);
            let ch = if s == grid.goal_index() {
                'G'
            } else if visited[s] {
                '*'
            } else {
                char::from_digit((grid.terrain[s] + 1) as u32 % 36, 36).unwrap_or('?')
            };
            out.push(ch);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Spearman rank correlation (average ranks for ties).
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &t in &idx[i..=j] {
                r[t] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub terrain_fractions: Vec<f64>,
    /// Value under the hidden weights of the map the policy runs in.
    pub value: f64,
    /// Worst case over `P_R` (not computed for the expert).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub worst_case: Option<f64>,
    pub render: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub slip: f64,
    pub demo_grid: GridSpec,
    pub test_grid: GridSpec,
    /// Hidden weights of the test map (demo weights plus the unknown terrain).
    pub hidden_weights: Vec<f64>,
    pub maxmin: PolicyReport,
    pub expert: PolicyReport,
    pub baseline: PolicyReport,
    /// Rank correlation of maxmin and expert fractions over the known terrains.
    pub profile_correlation: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let demo = make_expert(cfg, seed)?;
    let spec = experiment_spec(cfg, &demo)?;
    let test_grid = make_test_grid(cfg, seed)?;
    let test_mdp = build_mdp(&test_grid)?;
    let unknown = cfg.unknown_terrain();
    let tol = Tolerances::default();

    let fpl_cfg = FplConfig {
        method: cfg.method,
        ..FplConfig::new(cfg.fpl_iterations, seed)
    }
    .with_tail_fraction(cfg.tail_fraction);
    let (mixture, _) = fpl_solve(&test_mdp, &spec, &fpl_cfg)?;
    let maxmin: AnyPolicy = mixture.into();

    let mut brng = rng_for(seed, STREAM_BASELINE);
    let (lo, hi) = cfg.baseline_unknown_range;
    let mut hidden = demo.weights.clone();
    hidden[unknown] = brng.gen_range(lo..=hi);
    let baseline: AnyPolicy = solve_mdp(&test_mdp, &hidden, tol.mdp_tol)?.policy.into();
    let expert: AnyPolicy = demo.policy.clone().into();

    let value_of = |mdp: &Mdp, p: &AnyPolicy, w: &[f64]| -> Result<f64> {
        Ok(dot(crate::mdp::any_feature_expectation(mdp, p)?.as_slice(), w))
    };
    let worst = |p: &AnyPolicy| -> Result<f64> {
        Ok(evaluate_worst_case(&test_mdp, &spec, p, 1e-6, cfg.method)?.value)
    };
    let report_for = |grid: &GridSpec, mdp: &Mdp, p: &AnyPolicy, w: &[f64], wc: bool| -> Result<PolicyReport> {
        Ok(PolicyReport {
            terrain_fractions: terrain_fractions(grid, mdp, p)?,
            value: value_of(mdp, p, w)?,
            worst_case: if wc { Some(worst(p)?) } else { None },
            render: render_trajectory(grid, p, seed, cfg.render_steps)?,
        })
    };
    let maxmin = report_for(&test_grid, &test_mdp, &maxmin, &hidden, true)?;
    let baseline = report_for(&test_grid, &test_mdp, &baseline, &hidden, true)?;
    let expert = report_for(&demo.grid, &demo.mdp, &expert, &demo.weights, false)?;
    let known = cfg.demo_terrain_count;
    let profile_correlation = rank_correlation(
        &maxmin.terrain_fractions[..known],
        &expert.terrain_fractions[..known],
    );
    Ok(ExperimentReport {
        seed,
        slip: cfg.slip,
        demo_grid: demo.grid,
        test_grid,
        hidden_weights: hidden,
        maxmin,
        expert,
        baseline,
        profile_correlation,
    })
}

/// Fixed-width table of terrain fractions, one row per policy.
pub fn fraction_table(report: &ExperimentReport) -> String {
    let n = report.test_grid.n_terrain;
    let mut out = format!("seed {} slip {}\n{:<10}", report.seed, report.slip, "policy");
    for t in 1..=n {
        let _ = write!(out, " {:>9}", format!("terrain{t}"));
    }
    out.push('\n');
    for (name, p) in [("maxmin", &report.maxmin), ("expert", &report.expert), ("baseline", &report.baseline)] {
        let _ = write!(out, "{name:<10}");
        for f in &p.terrain_fractions {
            let _ = write!(out, " {f:>9.4}");
        }
        out.push('\n');
    }
    out
}
