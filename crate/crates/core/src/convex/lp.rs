//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Meant for small systems: reference answers in tests, the flow LPs of small
//! MDPs, and the localization LPs of the cutting-plane methods.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `optimize c·x  s.t.  rows[i]·x (≤|≥|=) rhs[i],  x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub rows: Vec<Vec<f64>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// One multiplier per constraint row with `value = rhs · duals`.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        LinearProgram {
            objective,
            sense,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn constraint(&mut self, row: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(row);
        self.relations.push(relation);
        self.rhs.push(rhs);
        self
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn solve(&self, tol: f64) -> Result<LpOutcome> {
        Tableau::build(self)?.run(self, tol)
    }
}

/// Standard form `A x = b, x ≥ 0`.
pub fn dense_lp_solve(
    a: &[Vec<f64>],
    b: &[f64],
    c: &[f64],
    sense: Sense,
    tol: f64,
) -> Result<LpOutcome> {
    let mut lp = LinearProgram::new(c.to_vec(), sense);
    for (row, &rhs) in a.iter().zip(b) {
        lp.constraint(row.clone(), Relation::Eq, rhs);
    }
    lp.solve(tol)
}

struct Tableau {
    /// `m` constraint rows then the objective row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    m: usize,
    n: usize,
    n_slack: usize,
    /// `-1` where a row was negated to make its rhs nonnegative.
    sign: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self> {
        let m = lp.rows.len();
        let n = lp.n_vars();
        if lp.relations.len() != m || lp.rhs.len() != m {
            return Err(Error::Shape("LP rows, relations, and rhs differ in length".into()));
        }
        for (i, r) in lp.rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Shape(format!(
                    "LP row {i} has {} coefficients, expected {n}",
                    r.len()
                )));
            }
        }
        if lp
            .rows
            .iter()
            .flatten()
            .chain(&lp.rhs)
            .chain(&lp.objective)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("linear program data".into()));
        }
        let n_slack = lp.relations.iter().filter(|r| **r != Relation::Eq).count();
        // Columns: structural | slack/surplus | artificial | rhs.
        let width = n + n_slack + m + 1;
        let mut t = vec![vec![0.0; width]; m + 1];
        let mut sign = vec![1.0; m];
        let mut slack_col = n;
        for i in 0..m {
            t[i][..n].copy_from_slice(&lp.rows[i]);
            match lp.relations[i] {
                Relation::Le => {
                    t[i][slack_col] = 1.0;
                    slack_col += 1;
                }
                Relation::Ge => {
                    t[i][slack_col] = -1.0;
                    slack_col += 1;
                }
                Relation::Eq => {}
            }
            t[i][width - 1] = lp.rhs[i];
            if lp.rhs[i] < 0.0 {
                sign[i] = -1.0;
                for v in &mut t[i][..n + n_slack] {
                    *v = -*v;
                }
                t[i][width - 1] = -lp.rhs[i];
            }
            t[i][n + n_slack + i] = 1.0;
        }
        let basis = (0..m).map(|i| n + n_slack + i).collect();
        Ok(Tableau {
            t,
            basis,
            m,
            n,
            n_slack,
            sign,
        })
    }

    fn width(&self) -> usize {
        self.n + self.n_slack + self.m + 1
    }

    fn art_start(&self) -> usize {
        self.n + self.n_slack
    }

    /// Recomputes the objective row as reduced costs for costs `cost`.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width();
        let mut obj = vec![0.0; w];
        obj[..cost.len()].copy_from_slice(cost);
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = cost.get(bv).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for j in 0..w {
                    obj[j] -= cb * self.t[i][j];
                }
            }
        }
        self.t[self.m] = obj;
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.t[row][col];
        for v in &mut self.t[row] {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for i in 0..=self.m {
            if i == row {
                continue;
            }
            let f = self.t[i][col];
            if f != 0.0 {
                let r = &mut self.t[i];
                for j in 0..w {
                    r[j] -= f * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes the priced objective over columns `< allowed`; `false` if unbounded.
    fn iterate(&mut self, allowed: usize, tol: f64) -> bool {
        let rhs = self.width() - 1;
        loop {
            // Bland: lowest-index improving column.
            let Some(col) = (0..allowed).find(|&j| self.t[self.m][j] < -tol) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i][col];
                if a > tol {
                    let ratio = self.t[i][rhs] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 * (1.0 + br.abs())
                                || (ratio <= br + 1e-12 * (1.0 + br.abs())
                                    && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return false,
                Some((row, _)) => self.pivot(row, col),
            }
        }
    }

    fn run(mut self, lp: &LinearProgram, tol: f64) -> Result<LpOutcome> {
        let w = self.width();
        let rhs = w - 1;
        let art = self.art_start();
        // Phase 1.
        let mut phase1 = vec![0.0; w - 1];
        for c in &mut phase1[art..] {
            *c = 1.0;
        }
        self.price(&phase1);
        if !self.iterate(w - 1, tol) {
            return Err(Error::Lp("phase one reported unbounded".into()));
        }
        let infeasibility = -self.t[self.m][rhs];
        let scale = 1.0 + lp.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeasibility > tol * scale * 10.0 {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..self.m {
            if self.basis[i] >= art {
                if let Some(col) = (0..art).find(|&j| self.t[i][j].abs() > tol) {
                    self.pivot(i, col);
                }
            }
        }
        // Phase 2.
        let flip = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let cost: Vec<f64> = lp.objective.iter().map(|c| flip * c).collect();
        self.price(&cost);
        if !self.iterate(art, tol) {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; self.n];
        for (i, &bv) in self.basis.iter().enumerate() {
            if bv < self.n {
                x[bv] = self.t[i][rhs].max(0.0);
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        // The artificial block started as the identity, so it now holds B⁻¹.
        let duals = (0..self.m)
            .map(|r| {
                let y: f64 = self
                    .basis
                    .iter()
                    .enumerate()
                    .map(|(i, &bv)| cost.get(bv).copied().unwrap_or(0.0) * self.t[i][art + r])
                    .sum();
                flip * self.sign[r] * y
            })
            .collect();
        Ok(LpOutcome::Optimal(LpSolution { x, value, duals }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_max() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36.
        let mut lp = LinearProgram::new(vec![3.0, 5.0], Sense::Maximize);
        lp.constraint(vec![1.0, 0.0], Relation::Le, 4.0)
            .constraint(vec![0.0, 2.0], Relation::Le, 12.0)
            .constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let sol = lp.solve(1e-9).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.value, 36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 6.0, epsilon = 1e-9);
        let dual_value: f64 = sol.duals.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum();
        assert_abs_diff_eq!(dual_value, 36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.duals[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.duals[1], 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.duals[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_two_variable() {
        // max x + y s.t. x + y ≤ 1, x ≤ 1, y ≤ 1, x - y ≤ 0 (degenerate vertex at (0,0) and (1/2,1/2)).
        let mut lp = LinearProgram::new(vec![1.0, 1.0], Sense::Maximize);
        lp.constraint(vec![1.0, 1.0], Relation::Le, 1.0)
            .constraint(vec![1.0, 0.0], Relation::Le, 1.0)
            .constraint(vec![0.0, 1.0], Relation::Le, 1.0)
            .constraint(vec![1.0, -1.0], Relation::Le, 0.0)
            .constraint(vec![-1.0, 1.0], Relation::Le, 1.0);
        let sol = lp.solve(1e-9).unwrap().optimal().unwrap();
        assert_abs_diff_eq!(sol.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0], Sense::Minimize);
        lp.constraint(vec![1.0], Relation::Le, 1.0)
            .constraint(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve(1e-9).unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(vec![1.0], Sense::Maximize);
        lp.constraint(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve(1e-9).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_standard_form_with_negative_rhs() {
        // min x1 + 2x2 s.t. -x1 - x2 = -3 → x1 = 3, value 3, dual -1.
        let out = dense_lp_solve(&[vec![-1.0, -1.0]], &[-3.0], &[1.0, 2.0], Sense::Minimize, 1e-9)
            .unwrap()
            .optimal()
            .unwrap();
        assert_abs_diff_eq!(out.value, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.duals[0] * -3.0, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let out = dense_lp_solve(
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            &[1.0, 2.0],
            &[1.0, 0.0],
            Sense::Minimize,
            1e-9,
        )
        .unwrap()
        .optimal()
        .unwrap();
        assert_abs_diff_eq!(out.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-12);
    }
}
