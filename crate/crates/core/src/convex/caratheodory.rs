//! Writing a point as a sparse convex combination of candidate points.

use super::{LinearProgram, Relation, Sense};
use crate::error::{Error, Result};

/// Finds weights `λ ≥ 0, Σλ = 1` with `Σ λ_i points[i] ≈ target`.
///
/// Solves `min Σ(s⁺ + s⁻)` over `Σ λ_i p_i + s⁺ - s⁻ = target`. A basic optimum
/// has at most `dim + 1` nonzero weights. Fails with [`Error::HullInfeasible`]
/// when the L1 distance to the hull exceeds `tol` (scaled by the target size).
/// Returns `(index, weight)` pairs with positive weight.
pub fn caratheodory_decompose(points: &[Vec<f64>], target: &[f64], tol: f64) -> Result<Vec<(usize, f64)>> {
    let k = target.len();
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no candidate points".into()));
    }
    if let Some(i) = points.iter().position(|p| p.len() != k) {
        return Err(Error::Shape(format!("point {i} has dimension {}, target has {k}", points[i].len())));
    }
    let nv = n + 2 * k;
    let mut obj = vec![0.0; nv];
    obj[n..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = LinearProgram::new(obj, Sense::Minimize);
    for j in 0..k {
        let mut row = vec![0.0; nv];
        for (i, p) in points.iter().enumerate() {
            row[i] = p[j];
        }
        row[n + j] = 1.0;
        row[n + k + j] = -1.0;
        lp.constraint(row, Relation::Eq, target[j]);
    }
    let mut sum_row = vec![0.0; nv];
    sum_row[..n].iter_mut().for_each(|v| *v = 1.0);
    lp.constraint(sum_row, Relation::Eq, 1.0);

    let sol = lp
        .solve(1e-11)?
        .optimal()
        .ok_or_else(|| Error::Lp("hull LP has no optimum".into()))?;
    let scale = 1.0 + target.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if sol.value > tol * scale {
        return Err(Error::HullInfeasible);
    }
    let mut out: Vec<(usize, f64)> = sol.x[..n]
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-12)
        .map(|(i, &w)| (i, w))
        .collect();
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    out.iter_mut().for_each(|(_, w)| *w /= total);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn combine(points: &[Vec<f64>], w: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; points[0].len()];
        for &(i, wi) in w {
            for (o, p) in out.iter_mut().zip(&points[i]) {
                *o += wi * p;
            }
        }
        out
    }

    #[test]
    fn midpoint_of_segment() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![5.0, 0.0]];
        let w = caratheodory_decompose(&pts, &[1.0, 1.0], 1e-9).unwrap();
        let back = combine(&pts, &w);
        assert!((back[0] - 1.0).abs() < 1e-9 && (back[1] - 1.0).abs() < 1e-9);
        assert!(w.len() <= 3);
    }

    #[test]
    fn outside_hull_is_reported() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(caratheodory_decompose(&pts, &[2.0], 1e-9), Err(Error::HullInfeasible)));
    }
}
