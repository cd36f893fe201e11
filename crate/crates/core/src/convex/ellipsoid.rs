//! Central-cut ellipsoid method.
//!
//! The ellipsoid is `{x : (x - c)ᵀ Q⁻¹ (x - c) ≤ 1}`. A cut with normal `a`
//! through the center keeps the half `a·x ≤ a·c` and replaces the ellipsoid by
//! the smallest one containing that half:
//!
//! ```txt
//!     b  = Q a / sqrt(aᵀ Q a)
//!     c' = c - b / (d + 1)
//!     Q' = d²/(d² - 1) · (Q - 2/(d + 1) · b bᵀ)
//! ```
//!
//! (for `d = 1` this degenerates to interval halving). Linear objectives are
//! handled by bisection on the objective level, each level solved as a
//! feasibility problem with the level set added as one more cut.

use nalgebra::{DMatrix, DVector};

use super::{
    box_cut, box_halfspaces, box_support, query, Halfspace, LinearOptimum, SeparationOracle,
    SeparationResponse, SolveReport, SolveStatus,
};
use crate::error::{Error, Result};
use crate::mdp::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub iteration: usize,
    /// `shape = factor · factorᵀ`; updates act on the factor so the shape stays
    /// positive definite even when the ellipsoid gets very flat.
    factor: DMatrix<f64>,
}

impl EllipsoidState {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        let d = center.len();
        EllipsoidState {
            center: DVector::from_column_slice(center),
            shape: DMatrix::identity(d, d) * (radius * radius),
            iteration: 0,
            factor: DMatrix::identity(d, d) * radius,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center_vec(&self) -> Vec<f64> {
        self.center.iter().copied().collect()
    }

    /// `½ ln det Q`, the log-volume up to the unit-ball constant.
    pub fn log_volume(&self) -> Option<f64> {
        let lu = self.factor.clone().lu();
        let det = lu.determinant().abs();
        (det > 0.0 && det.is_finite()).then(|| det.ln())
    }

    /// `max_{x ∈ E} a·x = a·c + sqrt(aᵀQa)`.
    pub fn support(&self, a: &[f64]) -> f64 {
        let a = DVector::from_column_slice(a);
        a.dot(&self.center) + (self.factor.transpose() * &a).norm()
    }

    /// Keeps `{x ∈ E : a·x ≤ a·c}` and re-encloses it.
    pub fn central_cut(&mut self, a: &[f64]) -> Result<()> {
        let d = self.dim();
        let a = DVector::from_column_slice(a);
        let lta = self.factor.transpose() * &a;
        let norm = lta.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::EllipsoidBreakdown {
                iteration: self.iteration,
            });
        }
        let u = lta / norm;
        let b = &self.factor * &u;
        let df = d as f64;
        if d == 1 {
            self.center -= &b * 0.5;
            self.factor *= 0.5;
        } else {
            self.center -= &b * (1.0 / (df + 1.0));
            // Q - β b bᵀ = L (I - β u uᵀ) Lᵀ and I - β u uᵀ = (I - γ u uᵀ)².
            let beta = 2.0 / (df + 1.0);
            let gamma = 1.0 - (1.0 - beta).sqrt();
            let scale = (df * df / (df * df - 1.0)).sqrt();
            let lu = &self.factor * &u;
            self.factor = (&self.factor - lu * u.transpose() * gamma) * scale;
        }
        self.shape = &self.factor * self.factor.transpose();
        self.shape = (&self.shape + self.shape.transpose()) * 0.5;
        self.iteration += 1;
        if self.center.iter().chain(self.factor.iter()).any(|v| !v.is_finite()) || self.log_volume().is_none() {
            return Err(Error::EllipsoidBreakdown {
                iteration: self.iteration,
            });
        }
        Ok(())
    }

    /// True when the whole ellipsoid lies strictly outside `h`.
    fn excludes(&self, h: &Halfspace) -> bool {
        let neg: Vec<f64> = h.normal.iter().map(|v| -v).collect();
        // min_{x∈E} n·x = -max_{x∈E} (-n)·x
        -self.support(&neg) > h.offset
    }

    fn max_semi_axis_bound(&self) -> f64 {
        self.factor.norm()
    }
}

/// Exact volume ratio of one central-cut update in dimension `d`.
pub fn central_cut_volume_ratio(d: usize) -> f64 {
    if d == 1 {
        return 0.5;
    }
    let df = d as f64;
    (df / (df + 1.0)) * (df * df / (df * df - 1.0)).powf((df - 1.0) / 2.0)
}

/// The textbook per-step upper bound `exp(-1/(2(d+1)))` on the volume ratio.
pub fn volume_ratio_bound(d: usize) -> f64 {
    (-1.0 / (2.0 * (d as f64 + 1.0))).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidOptions {
    /// Iteration cap for one feasibility run (one objective level).
    pub max_iters: usize,
    pub record_queries: bool,
    pub cut_slack: f64,
}

impl Default for EllipsoidOptions {
    fn default() -> Self {
        EllipsoidOptions {
            max_iters: 20_000,
            record_queries: false,
            cut_slack: 1e-12,
        }
    }
}

enum Feasibility {
    Found(Vec<f64>),
    Empty { certified: bool },
}

/// Runs central-cut iterations from `state` until the oracle accepts the center.
///
/// `known` are halfspaces the caller knows contain the target set; when the
/// ellipsoid falls entirely outside one of them (or outside the last cut) the
/// set is certified empty.
fn run_feasibility<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    state: &mut EllipsoidState,
    known: &[Halfspace],
    opts: &EllipsoidOptions,
    report: &mut SolveReport,
    min_width: f64,
) -> Result<Feasibility> {
    for _ in 0..opts.max_iters {
        let x = state.center_vec();
        match query(oracle, &x, report, opts.cut_slack)? {
            SeparationResponse::Inside => return Ok(Feasibility::Found(x)),
            SeparationResponse::Cut(h) => {
                state.central_cut(&h.normal)?;
                report.iterations += 1;
                if state.excludes(&h) || known.iter().any(|k| state.excludes(k)) {
                    return Ok(Feasibility::Empty { certified: true });
                }
                if state.max_semi_axis_bound() < min_width {
                    return Ok(Feasibility::Empty { certified: true });
                }
            }
        }
    }
    Ok(Feasibility::Empty { certified: false })
}

/// Finds a point accepted by `oracle` inside the origin-centered ball of
/// `radius`, or reports the set empty after `max_iters` central cuts.
pub fn ellipsoid_feasibility<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    dim: usize,
    radius: f64,
    max_iters: usize,
) -> Result<(Option<Vec<f64>>, SolveReport)> {
    if dim == 0 || !(radius > 0.0) || max_iters == 0 {
        return Err(Error::InvalidArgument(
            "ellipsoid needs dim ≥ 1, radius > 0, max_iters ≥ 1".into(),
        ));
    }
    let opts = EllipsoidOptions {
        max_iters,
        ..Default::default()
    };
    let mut report = SolveReport::new(false);
    let mut state = EllipsoidState::ball(&vec![0.0; dim], radius);
    let out = run_feasibility(oracle, &mut state, &[], &opts, &mut report, 1e-13 * radius)?;
    Ok(match out {
        Feasibility::Found(x) => {
            report.status = SolveStatus::Optimal;
            (Some(x), report)
        }
        Feasibility::Empty { certified } => {
            report.status = SolveStatus::Infeasible;
            if !certified {
                report.uncertified_levels = 1;
            }
            (None, report)
        }
    })
}

/// `max c·x` over the oracle's set, assumed inside the ball of `radius`.
pub fn maximize_linear<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    c: &[f64],
    dim: usize,
    radius: f64,
    eps: f64,
    max_iters: usize,
) -> Result<LinearOptimum> {
    if c.len() != dim {
        return Err(Error::Shape("objective dimension mismatch".into()));
    }
    let lo = vec![-radius; dim];
    let hi = vec![radius; dim];
    let opts = EllipsoidOptions {
        max_iters,
        ..Default::default()
    };
    maximize_in(oracle, c, &lo, &hi, EllipsoidState::ball(&vec![0.0; dim], radius), eps, &opts)
}

/// `max c·x` over the oracle's set intersected with the box `[lo, hi]`.
pub fn maximize_linear_over_box<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    c: &[f64],
    lo: &[f64],
    hi: &[f64],
    eps: f64,
    opts: &EllipsoidOptions,
) -> Result<LinearOptimum> {
    let d = c.len();
    if lo.len() != d || hi.len() != d {
        return Err(Error::Shape("box dimension mismatch".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
        return Err(Error::InvalidArgument("box bounds must be finite with lo ≤ hi".into()));
    }
    let center: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let radius = lo
        .iter()
        .zip(hi)
        .map(|(l, h)| (0.5 * (h - l)).powi(2))
        .sum::<f64>()
        .sqrt()
        .max(1e-12)
        * (1.0 + 1e-9);
    maximize_in(oracle, c, lo, hi, EllipsoidState::ball(&center, radius), eps, opts)
}

fn maximize_in<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    c: &[f64],
    lo: &[f64],
    hi: &[f64],
    start: EllipsoidState,
    eps: f64,
    opts: &EllipsoidOptions,
) -> Result<LinearOptimum> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective".into()));
    }
    let mut report = SolveReport::new(opts.record_queries);
    let faces = box_halfspaces(lo, hi);
    let min_width = 1e-13 * start.max_semi_axis_bound().max(1.0);
    let c_zero = c.iter().all(|&v| v == 0.0);

    let mut saved = start;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut upper = box_support(c, lo, hi);
    let mut level: Option<f64> = None;
    loop {
        let mut state = saved.clone();
        let mut known = faces.clone();
        let level_cut = level.map(|a| Halfspace {
            normal: c.iter().map(|v| -v).collect(),
            offset: -a,
        });
        if let Some(h) = &level_cut {
            known.push(h.clone());
        }
        let mut wrapped = |x: &[f64]| -> Result<SeparationResponse> {
            if let Some(h) = box_cut(x, lo, hi) {
                return Ok(SeparationResponse::Cut(h));
            }
            if let Some(h) = &level_cut {
                if h.violation(x) > 0.0 {
                    return Ok(SeparationResponse::Cut(h.clone()));
                }
            }
            oracle.separate(x)
        };
        let outcome = match run_feasibility(&mut wrapped, &mut state, &known, opts, &mut report, min_width) {
            Ok(o) => o,
            // A level set too flat to represent is treated like an iteration cap hit.
            Err(Error::EllipsoidBreakdown { .. }) if level.is_some() => Feasibility::Empty { certified: false },
            Err(Error::EllipsoidBreakdown { .. }) => {
                return Err(Error::EllipsoidBreakdown {
                    iteration: report.iterations,
                })
            }
            Err(e) => return Err(e),
        };
        match outcome {
            Feasibility::Found(x) => {
                let v = dot(c, &x);
                best = Some((x, v));
                saved = state;
            }
            Feasibility::Empty { certified } => {
                if !certified {
                    report.uncertified_levels += 1;
                }
                match level {
                    None => {
                        report.status = SolveStatus::Infeasible;
                        return Ok(LinearOptimum {
                            point: None,
                            value: f64::NAN,
                            bound: f64::NAN,
                            report,
                        });
                    }
                    Some(a) => upper = a,
                }
            }
        }
        let (_, lower) = best.as_ref().expect("a level is only set after a feasible point");
        if c_zero || upper - lower <= eps {
            report.status = SolveStatus::Optimal;
            break;
        }
        level = Some(0.5 * (lower + upper));
    }
    let (x, v) = best.expect("loop exits with a point");
    Ok(LinearOptimum {
        point: Some(x),
        value: v,
        bound: upper.max(v),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::HalfspaceOracle;
    use approx::assert_abs_diff_eq;

    fn boxed(lo: f64, hi: f64, d: usize) -> HalfspaceOracle {
        HalfspaceOracle {
            halfspaces: box_halfspaces(&vec![lo; d], &vec![hi; d]),
        }
    }

    #[test]
    fn accept_all_returns_origin_in_one_call() {
        let mut all = |_: &[f64]| Ok(SeparationResponse::Inside);
        let (x, report) = ellipsoid_feasibility(&mut all, 3, 10.0, 5).unwrap();
        assert_eq!(x.unwrap(), vec![0.0; 3]);
        assert_eq!(report.oracle_calls, 1);
    }

    #[test]
    fn finds_point_in_offset_box() {
        let mut o = boxed(1.0, 2.0, 2);
        let (x, report) = ellipsoid_feasibility(&mut o, 2, 10.0, 200).unwrap();
        let x = x.expect("box [1,2]^2 is nonempty");
        assert!(x.iter().all(|v| (1.0..=2.0).contains(v)), "{x:?}");
        assert!(report.iterations <= 200);
    }

    #[test]
    fn empty_interval_is_infeasible() {
        // {x ≤ 0} ∩ {x ≥ 1}: after n halvings the interval has width 2r/2^n; the
        // volume bound needs 2r/2^n < 1 (the gap), so 10 iterations suffice for r = 10.
        let mut o = HalfspaceOracle {
            halfspaces: vec![
                Halfspace::new(vec![1.0], 0.0).unwrap(),
                Halfspace::new(vec![-1.0], -1.0).unwrap(),
            ],
        };
        let (x, report) = ellipsoid_feasibility(&mut o, 1, 10.0, 60).unwrap();
        assert!(x.is_none());
        assert_eq!(report.status, SolveStatus::Infeasible);
    }

    #[test]
    fn box_maximum() {
        let mut o = boxed(-1.0, 1.0, 2);
        let opt = maximize_linear(&mut o, &[1.0, 0.0], 2, 2.0, 1e-6, 5000).unwrap();
        assert_abs_diff_eq!(opt.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn simplex_maximum() {
        let mut hs = vec![Halfspace::new(vec![1.0, 1.0, 1.0], 1.0).unwrap()];
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = -1.0;
            hs.push(Halfspace::new(e, 0.0).unwrap());
        }
        let mut o = HalfspaceOracle { halfspaces: hs };
        let opt = maximize_linear(&mut o, &[1.0, 1.0, 1.0], 3, 2.0, 1e-6, 5000).unwrap();
        assert_abs_diff_eq!(opt.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn volume_ratio_matches_closed_form() {
        for d in 1..=6 {
            let mut e = EllipsoidState::ball(&vec![0.0; d], 1.0);
            let mut a = vec![0.3; d];
            a[0] = 1.0;
            let before = e.log_volume().unwrap();
            e.central_cut(&a).unwrap();
            let ratio = (e.log_volume().unwrap() - before).exp();
            assert_abs_diff_eq!(ratio, central_cut_volume_ratio(d), epsilon = 1e-12);
            assert!(ratio <= volume_ratio_bound(d));
        }
    }

    #[test]
    fn shape_stays_symmetric() {
        let mut e = EllipsoidState::ball(&[0.0, 0.0, 0.0], 1.0);
        for i in 0..50 {
            let a = [(i as f64).sin(), (i as f64 * 0.7).cos(), 0.3];
            e.central_cut(&a).unwrap();
            let asym = (&e.shape - e.shape.transpose()).abs().max();
            assert!(asym <= 1e-9);
        }
    }
}
