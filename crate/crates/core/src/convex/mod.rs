//! Convex machinery driven by separation oracles.
//!
//! Everything here talks in terms of [`Halfspace`] cuts `normal · x ≤ offset`
//! and [`SeparationResponse`]s. Two cutting-plane engines are provided: the
//! central-cut ellipsoid method ([`ellipsoid`]) and the analytic-center
//! cutting-plane method ([`accpm`]). A dense simplex ([`lp`]) serves as reference
//! solver and inner workhorse, and [`caratheodory`] writes a point as a convex
//! combination of given points.

pub mod accpm;
pub mod caratheodory;
pub mod ellipsoid;
pub mod lp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::dot;

pub use accpm::{accpm_minimize, accpm_minimize_warm, AccpmOptions};
pub use caratheodory::caratheodory_decompose;
pub use ellipsoid::{
    ellipsoid_feasibility, maximize_linear, maximize_linear_over_box, EllipsoidOptions,
    EllipsoidState,
};
pub use lp::{dense_lp_solve, LinearProgram, LpOutcome, LpSolution, Relation, Sense};

/// The closed halfspace `{x : normal · x ≤ offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.iter().chain(std::iter::once(&offset)).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("halfspace".into()));
        }
        if normal.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("halfspace normal is all zero".into()));
        }
        Ok(Halfspace { normal, offset })
    }

    /// `normal · x - offset`; positive means `x` is outside.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        self.violation(x) <= slack
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }
}

/// Answer of a separation oracle for a query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SeparationResponse {
    Inside,
    Cut(Halfspace),
}

impl SeparationResponse {
    pub fn is_inside(&self) -> bool {
        matches!(self, SeparationResponse::Inside)
    }

    pub fn cut(&self) -> Option<&Halfspace> {
        match self {
            SeparationResponse::Cut(h) => Some(h),
            SeparationResponse::Inside => None,
        }
    }
}

/// A separation oracle over `R^d`.
pub trait SeparationOracle {
    fn separate(&mut self, x: &[f64]) -> Result<SeparationResponse>;
}

impl<F> SeparationOracle for F
where
    F: FnMut(&[f64]) -> Result<SeparationResponse>,
{
    fn separate(&mut self, x: &[f64]) -> Result<SeparationResponse> {
        self(x)
    }
}

/// Oracle for an explicit list of halfspaces: returns the first violated one.
#[derive(Debug, Clone)]
pub struct HalfspaceOracle {
    pub halfspaces: Vec<Halfspace>,
}

impl SeparationOracle for HalfspaceOracle {
    fn separate(&mut self, x: &[f64]) -> Result<SeparationResponse> {
        Ok(self
            .halfspaces
            .iter()
            .find(|h| h.violation(x) > 0.0)
            .map_or(SeparationResponse::Inside, |h| SeparationResponse::Cut(h.clone())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub oracle_calls: usize,
    /// Analytic-center steps that fell back to a bounding-box center.
    #[serde(default)]
    pub degraded_steps: usize,
    /// Objective levels declared empty only because the iteration cap was hit.
    #[serde(default)]
    pub uncertified_levels: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub queries: Option<Vec<(Vec<f64>, SeparationResponse)>>,
}

impl SolveReport {
    pub(crate) fn new(record: bool) -> Self {
        SolveReport {
            status: SolveStatus::IterationLimit,
            iterations: 0,
            oracle_calls: 0,
            degraded_steps: 0,
            uncertified_levels: 0,
            queries: record.then(Vec::new),
        }
    }

    pub(crate) fn absorb(&mut self, other: &SolveReport) {
        self.iterations += other.iterations;
        self.oracle_calls += other.oracle_calls;
        self.degraded_steps += other.degraded_steps;
        self.uncertified_levels += other.uncertified_levels;
    }
}

/// Result of optimizing a linear objective over an oracle-described set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOptimum {
    /// Best oracle-accepted point, `None` when the set is empty.
    pub point: Option<Vec<f64>>,
    /// Objective at `point` (NaN when empty).
    pub value: f64,
    /// Certified bound on the optimum from the other side.
    pub bound: f64,
    pub report: SolveReport,
}

/// Calls the oracle, checks that any cut separates `x`, and logs the exchange.
pub(crate) fn query<O: SeparationOracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    report: &mut SolveReport,
    slack: f64,
) -> Result<SeparationResponse> {
    report.oracle_calls += 1;
    let resp = oracle.separate(x)?;
    if let SeparationResponse::Cut(h) = &resp {
        if h.dim() != x.len() {
            return Err(Error::Shape(format!(
                "oracle cut has dimension {}, query has {}",
                h.dim(),
                x.len()
            )));
        }
        let scale = 1.0 + h.normal.iter().map(|v| v.abs()).sum::<f64>() * x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            + h.offset.abs();
        if h.violation(x) < -slack * scale {
            return Err(Error::Contract(format!(
                "oracle cut does not separate the query (violation {:e})",
                h.violation(x)
            )));
        }
    }
    if let Some(log) = report.queries.as_mut() {
        log.push((x.to_vec(), resp.clone()));
    }
    Ok(resp)
}

/// Faces of the box `lo ≤ x ≤ hi` as halfspaces.
pub(crate) fn box_halfspaces(lo: &[f64], hi: &[f64]) -> Vec<Halfspace> {
    let d = lo.len();
    let mut out = Vec::with_capacity(2 * d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        out.push(Halfspace {
            normal: e.clone(),
            offset: hi[i],
        });
        e[i] = -1.0;
        out.push(Halfspace {
            normal: e,
            offset: -lo[i],
        });
    }
    out
}

/// First violated box face, if any.
pub(crate) fn box_cut(x: &[f64], lo: &[f64], hi: &[f64]) -> Option<Halfspace> {
    let d = x.len();
    for i in 0..d {
        if x[i] > hi[i] {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            return Some(Halfspace {
                normal: e,
                offset: hi[i],
            });
        }
        if x[i] < lo[i] {
            let mut e = vec![0.0; d];
            e[i] = -1.0;
            return Some(Halfspace {
                normal: e,
                offset: -lo[i],
            });
        }
    }
    None
}

/// `max_{lo ≤ x ≤ hi} c · x`.
pub(crate) fn box_support(c: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    c.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&ci, (&l, &h))| if ci >= 0.0 { ci * h } else { ci * l })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfspace_rejects_zero_normal() {
        assert!(Halfspace::new(vec![0.0, 0.0], 1.0).is_err());
        assert!(Halfspace::new(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn query_rejects_non_separating_cut() {
        let mut bad = |_: &[f64]| -> Result<SeparationResponse> {
            Ok(SeparationResponse::Cut(Halfspace::new(vec![1.0], 5.0).unwrap()))
        };
        let mut report = SolveReport::new(false);
        assert!(matches!(
            query(&mut bad, &[0.0], &mut report, 1e-12),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn box_support_picks_corners() {
        assert_eq!(box_support(&[1.0, -2.0], &[-1.0, -1.0], &[2.0, 3.0]), 4.0);
    }
}
