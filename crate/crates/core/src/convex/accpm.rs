//! Analytic-center cutting-plane method for `min c·x` over an oracle set in a box.
//!
//! The localization polytope `{A x ≤ b}` holds the box faces, every cut the
//! oracle returned, and the objective cut `c·x ≤ best` once a feasible point is
//! known. Each iteration queries its analytic center. Lower bounds come from the
//! LP `min c·x` over box and oracle cuts, solved through its dual so the tableau
//! has only `d` rows.

use nalgebra::{DMatrix, DVector};

use super::{
    box_halfspaces, query, Halfspace, LinearOptimum, LinearProgram, LpOutcome, Relation,
    SeparationOracle, SeparationResponse, Sense, SolveReport, SolveStatus,
};
use crate::error::{Error, Result};
use crate::mdp::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccpmOptions {
    pub max_iters: usize,
    pub newton_tol: f64,
    pub newton_max_steps: usize,
    pub lp_tol: f64,
    pub cut_slack: f64,
    pub record_queries: bool,
    /// Query the LP-relaxation minimizer between analytic-center steps.
    pub probe_lp_vertex: bool,
}

impl Default for AccpmOptions {
    fn default() -> Self {
        AccpmOptions {
            max_iters: 500,
            newton_tol: 1e-8,
            newton_max_steps: 200,
            lp_tol: 1e-9,
            cut_slack: 1e-12,
            record_queries: false,
            probe_lp_vertex: true,
        }
    }
}

fn normalized(h: &Halfspace) -> (Vec<f64>, f64) {
    let n = h.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    (h.normal.iter().map(|v| v / n).collect(), h.offset / n)
}

/// Analytic center of `{x : A x ≤ b}`, the minimizer of `-Σ log(b - A x)`.
///
/// From an infeasible start, Newton steps on `A x + s = b` with `s > 0` are
/// taken until a full step lands on a strictly feasible point; from there plain
/// damped Newton runs until the Newton decrement drops below `tol`. Returns
/// `None` when that does not happen within `max_steps`.
pub(crate) fn analytic_center(
    rows: &[Vec<f64>],
    b: &[f64],
    start: &[f64],
    tol: f64,
    max_steps: usize,
) -> Option<Vec<f64>> {
    let m = rows.len();
    let d = start.len();
    let a = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
    let bv = DVector::from_column_slice(b);
    let mut x = DVector::from_column_slice(start);
    let slack_at = |x: &DVector<f64>| &bv - &a * x;
    let mut s = slack_at(&x);
    let mut feasible = s.iter().all(|&v| v > 0.0);
    if !feasible {
        s.iter_mut().for_each(|v| *v = v.max(1e-2));
    }
    let barrier = |s: &DVector<f64>| -> f64 { -s.iter().map(|v| v.ln()).sum::<f64>() };

    for _ in 0..max_steps {
        let inv_s = s.map(|v| 1.0 / v);
        let mut h = DMatrix::zeros(d, d);
        for i in 0..m {
            let row = a.row(i);
            h += row.transpose() * row * (inv_s[i] * inv_s[i]);
        }
        let chol = h.cholesky()?;
        if feasible {
            let g = a.transpose() * &inv_s;
            let dx = -chol.solve(&g);
            let decrement = (-g.dot(&dx)).max(0.0).sqrt();
            if decrement < tol {
                return Some(x.iter().copied().collect());
            }
            let ds = -(&a * &dx);
            let mut t = 1.0;
            while (0..m).any(|i| s[i] + t * ds[i] <= 0.0) {
                t *= 0.5;
            }
            if decrement > 0.25 {
                let f0 = barrier(&s);
                while barrier(&(&s + &ds * t)) > f0 - 0.25 * t * decrement * decrement {
                    t *= 0.5;
                    if t < 1e-14 {
                        return None;
                    }
                }
            }
            x += &dx * t;
            s = slack_at(&x);
            if s.iter().any(|&v| v <= 0.0) {
                return None;
            }
        } else {
            // Residual of A x + s = b; the Newton step zeroes it at t = 1.
            let r = &a * &x + &s - &bv;
            let g = DVector::from_fn(m, |i, _| inv_s[i] + r[i] * inv_s[i] * inv_s[i]);
            let dx = -chol.solve(&(a.transpose() * g));
            let ds = -&r - &a * &dx;
            let mut t: f64 = 1.0;
            while (0..m).any(|i| s[i] + t * ds[i] <= 0.0) {
                t *= 0.5;
                if t < 1e-14 {
                    return None;
                }
            }
            x += &dx * t;
            if t == 1.0 {
                s = slack_at(&x);
                feasible = s.iter().all(|&v| v > 0.0);
                if !feasible {
                    s.iter_mut().for_each(|v| *v = v.max(1e-12));
                }
            } else {
                s += &ds * t;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    None
}

/// `min c·x` over `{A x ≤ b} ∩ [lo, hi]` via the dual
/// `max -b'·λ - u·ν  s.t.  Aᵀλ + ν ≥ -c,  λ, ν ≥ 0`
/// with `b' = b - A lo`, `u = hi - lo`. Returns the optimal value and a primal
/// minimizer (read off the dual's multipliers), or `None` when the primal is
/// infeasible.
fn box_lp_lower_bound(
    c: &[f64],
    rows: &[Vec<f64>],
    b: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let d = c.len();
    let m = rows.len();
    let mut obj = Vec::with_capacity(m + d);
    for (row, &bi) in rows.iter().zip(b) {
        obj.push(-(bi - dot(row, lo)));
    }
    for j in 0..d {
        obj.push(-(hi[j] - lo[j]));
    }
    let mut lp = LinearProgram::new(obj, Sense::Maximize);
    for j in 0..d {
        let mut coef: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        coef.extend((0..d).map(|i| if i == j { 1.0 } else { 0.0 }));
        lp.constraint(coef, Relation::Ge, -c[j]);
    }
    match lp.solve(tol)? {
        LpOutcome::Optimal(sol) => {
            let x = (0..d)
                .map(|j| (lo[j] - sol.duals[j]).clamp(lo[j], hi[j]))
                .collect();
            Ok(Some((dot(c, lo) + sol.value, x)))
        }
        LpOutcome::Unbounded => Ok(None),
        LpOutcome::Infeasible => Err(Error::Lp("dual of a box LP cannot be infeasible".into())),
    }
}

/// Center of the bounding box of `{A x ≤ b}`, found with `2d` LPs.
fn bounding_box_center(rows: &[Vec<f64>], b: &[f64], lo: &[f64], tol: f64) -> Result<Option<Vec<f64>>> {
    // Shift to y = x - lo ≥ 0 so the LP's sign constraints are the lower box faces.
    let d = lo.len();
    let mut center = vec![0.0; d];
    for j in 0..d {
        let mut ends = [0.0; 2];
        for (e, sense) in [Sense::Minimize, Sense::Maximize].into_iter().enumerate() {
            let mut obj = vec![0.0; d];
            obj[j] = 1.0;
            let mut lp = LinearProgram::new(obj, sense);
            for (row, &bi) in rows.iter().zip(b) {
                lp.constraint(row.clone(), Relation::Le, bi - dot(row, lo));
            }
            match lp.solve(tol)?.optimal() {
                Some(sol) => ends[e] = sol.value,
                None => return Ok(None),
            }
        }
        center[j] = lo[j] + 0.5 * (ends[0] + ends[1]);
    }
    Ok(Some(center))
}

/// Minimizes `c·x` over the oracle's set intersected with `[lo, hi]`.
///
/// `value` is the best accepted point's objective and `bound` a certified lower
/// bound; the solve stops once they are within `eps`.
pub fn accpm_minimize<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    c: &[f64],
    lo: &[f64],
    hi: &[f64],
    eps: f64,
    opts: &AccpmOptions,
) -> Result<LinearOptimum> {
    accpm_minimize_warm(oracle, c, lo, hi, eps, opts, &[])
}

/// [`accpm_minimize`] with cuts known in advance to contain the oracle's set.
///
/// When `opts.probe_lp_vertex` is set, the minimizer of the current LP
/// relaxation is queried after every analytic-center cut; if the oracle accepts
/// it the relaxation is tight and the solve ends at once. With a good warm
/// start this usually takes a single oracle call.
pub fn accpm_minimize_warm<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    c: &[f64],
    lo: &[f64],
    hi: &[f64],
    eps: f64,
    opts: &AccpmOptions,
    initial_cuts: &[Halfspace],
) -> Result<LinearOptimum> {
    let d = c.len();
    if lo.len() != d || hi.len() != d {
        return Err(Error::Shape("box dimension mismatch".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("ACCPM needs dimension ≥ 1".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if c.iter().chain(lo).chain(hi).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ACCPM objective or box".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
        return Err(Error::InvalidArgument("ACCPM box needs lo < hi in every coordinate".into()));
    }
    if let Some(h) = initial_cuts.iter().find(|h| h.dim() != d) {
        return Err(Error::Shape(format!("warm-start cut has dimension {}, expected {d}", h.dim())));
    }

    let mut report = SolveReport::new(opts.record_queries);
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for h in box_halfspaces(lo, hi) {
        rows.push(h.normal);
        b.push(h.offset);
    }
    let n_box = rows.len();
    for h in initial_cuts {
        let (n, o) = normalized(h);
        rows.push(n);
        b.push(o);
    }
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c_unit: Vec<f64> = if c_norm > 0.0 { c.iter().map(|v| v / c_norm).collect() } else { vec![] };
    let infeasible = |report: SolveReport| LinearOptimum {
        point: None,
        value: f64::NAN,
        bound: f64::NAN,
        report: SolveReport {
            status: SolveStatus::Infeasible,
            ..report
        },
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    let (mut lower, mut probe) = match box_lp_lower_bound(c, &rows[n_box..], &b[n_box..], lo, hi, opts.lp_tol)? {
        Some((l, p)) => (l, opts.probe_lp_vertex.then_some(p)),
        None => return Ok(infeasible(report)),
    };
    let mut x: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();

    for _ in 0..opts.max_iters {
        let probing = probe.is_some();
        let point = match probe.take() {
            Some(p) => p,
            None => {
                // The objective cut is rebuilt each round from the incumbent.
                let (mut all_rows, mut all_b) = (rows.clone(), b.clone());
                if let Some((_, v)) = &best {
                    all_rows.push(c_unit.clone());
                    all_b.push(v / c_norm);
                }
                match analytic_center(&all_rows, &all_b, &x, opts.newton_tol, opts.newton_max_steps) {
                    Some(p) => p,
                    None => {
                        report.degraded_steps += 1;
                        match bounding_box_center(&all_rows, &all_b, lo, opts.lp_tol)? {
                            Some(p) => p,
                            None => break,
                        }
                    }
                }
            }
        };
        if !probing {
            x = point.clone();
        }
        report.iterations += 1;
        match query(oracle, &point, &mut report, opts.cut_slack)? {
            SeparationResponse::Inside => {
                let v = dot(c, &point);
                if c_norm == 0.0 {
                    report.status = SolveStatus::Optimal;
                    return Ok(LinearOptimum { point: Some(point), value: v, bound: v, report });
                }
                if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
                    best = Some((point, v));
                }
            }
            SeparationResponse::Cut(h) => {
                let (n, o) = normalized(&h);
                rows.push(n);
                b.push(o);
                match box_lp_lower_bound(c, &rows[n_box..], &b[n_box..], lo, hi, opts.lp_tol)? {
                    Some((l, p)) => {
                        lower = lower.max(l);
                        // Alternate probes with center steps so the relaxation
                        // cannot zigzag on its own.
                        if opts.probe_lp_vertex && !probing {
                            probe = Some(p);
                        }
                    }
                    None => {
                        if best.is_none() {
                            return Ok(infeasible(report));
                        }
                        // Round-off in the cuts: the incumbent is as good as it gets.
                        lower = best.as_ref().map(|(_, v)| *v).unwrap();
                    }
                }
            }
        }
        if let Some((_, v)) = &best {
            if v - lower <= eps {
                report.status = SolveStatus::Optimal;
                break;
            }
        }
    }
    match best {
        Some((p, v)) => Ok(LinearOptimum {
            point: Some(p),
            value: v,
            bound: lower.min(v),
            report,
        }),
        None => Ok(LinearOptimum {
            point: None,
            value: f64::NAN,
            bound: lower,
            report,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::HalfspaceOracle;
    use approx::assert_abs_diff_eq;

    #[test]
    fn center_of_square_is_midpoint() {
        let hs = box_halfspaces(&[0.0, 0.0], &[2.0, 4.0]);
        let rows: Vec<_> = hs.iter().map(|h| h.normal.clone()).collect();
        let b: Vec<_> = hs.iter().map(|h| h.offset).collect();
        let x = analytic_center(&rows, &b, &[0.1, 3.9], 1e-10, 100).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn center_of_triangle() {
        // {x ≥ 0, y ≥ 0, x + y ≤ 1}: the analytic center is (1/3, 1/3) by symmetry.
        let rows = vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]];
        let b = vec![0.0, 0.0, 1.0];
        let x = analytic_center(&rows, &b, &[5.0, -3.0], 1e-10, 100).unwrap();
        assert_abs_diff_eq!(x[0], 1.0 / 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], 1.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn lower_bound_lp() {
        // min -x - y over x + y ≤ 1.5 in [0,1]^2 is -1.5.
        let (v, x) = box_lp_lower_bound(&[-1.0, -1.0], &[vec![1.0, 1.0]], &[1.5], &[0.0, 0.0], &[1.0, 1.0], 1e-10)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(v, -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(-x[0] - x[1], -1.5, epsilon = 1e-12);
        assert!(x[0] + x[1] <= 1.5 + 1e-12);

        // Shifted box: the minimizer is read back in original coordinates.
        let (v, x) = box_lp_lower_bound(&[1.0, 2.0], &[vec![-1.0, -1.0]], &[-1.0], &[-1.0, -1.0], &[3.0, 3.0], 1e-10)
            .unwrap()
            .unwrap();
        // min x + 2y with x + y ≥ 1 in [-1, 3]²: y = -1, x = 2.
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], -1.0, epsilon = 1e-12);
        let none = box_lp_lower_bound(&[1.0], &[vec![1.0]], &[-1.0], &[0.0], &[1.0], 1e-10).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn minimizes_over_halfspaces() {
        let mut o = HalfspaceOracle {
            halfspaces: vec![Halfspace::new(vec![-1.0, -1.0], -1.0).unwrap()],
        };
        let opt = accpm_minimize(&mut o, &[2.0, 1.0], &[0.0, 0.0], &[3.0, 3.0], 1e-7, &AccpmOptions::default())
            .unwrap();
        assert_eq!(opt.report.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(opt.value, 1.0, epsilon = 1e-6);
        assert!(opt.bound <= opt.value && opt.value - opt.bound <= 1e-7);
    }

    #[test]
    fn center_steps_alone_converge() {
        let mut o = HalfspaceOracle {
            halfspaces: vec![Halfspace::new(vec![-1.0, -1.0], -1.0).unwrap()],
        };
        let opts = AccpmOptions {
            probe_lp_vertex: false,
            ..Default::default()
        };
        let opt = accpm_minimize(&mut o, &[2.0, 1.0], &[0.0, 0.0], &[3.0, 3.0], 1e-7, &opts).unwrap();
        assert_eq!(opt.report.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(opt.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn warm_start_finishes_in_one_call() {
        let cut = Halfspace::new(vec![-1.0, -1.0], -1.0).unwrap();
        let mut o = HalfspaceOracle {
            halfspaces: vec![cut.clone()],
        };
        let opt = accpm_minimize_warm(
            &mut o,
            &[2.0, 1.0],
            &[0.0, 0.0],
            &[3.0, 3.0],
            1e-7,
            &AccpmOptions::default(),
            &[cut],
        )
        .unwrap();
        assert_eq!(opt.report.oracle_calls, 1);
        assert_abs_diff_eq!(opt.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn detects_empty_set() {
        let mut o = HalfspaceOracle {
            halfspaces: vec![
                Halfspace::new(vec![1.0], 0.2).unwrap(),
                Halfspace::new(vec![-1.0], -0.8).unwrap(),
            ],
        };
        let opt = accpm_minimize(&mut o, &[1.0], &[0.0], &[1.0], 1e-7, &AccpmOptions::default()).unwrap();
        assert_eq!(opt.report.status, SolveStatus::Infeasible);
        assert!(opt.point.is_none());
    }
}
