//! Brute-force KKT enumeration for small polyhedra.
//!
//! Independent of the active-set solver: it never iterates, it only solves
//! `min ‖y - x‖ s.t. a_i·y = b_i (i ∈ S)` for every candidate active set `S`
//! via an SVD pseudo-inverse and keeps the candidates that are primal
//! feasible with nonnegative inequality multipliers.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use super::{dist, PolytopeError, Polyhedron};

/// Largest total row count accepted by [`project_oracle`].
pub const ORACLE_MAX_ROWS: usize = 20;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;

/// Projection by enumeration of candidate active sets.
///
/// Equality rows are part of every candidate. Inequality subsets are visited
/// by cardinality, then lexicographically, and only those with at most
/// `dim` rows in total are solved: every KKT point admits a linearly
/// independent active set, which can never exceed `dim` rows. Among the
/// surviving candidates the one of minimum distance wins, earlier candidates
/// winning ties.
pub fn project_oracle(poly: &Polyhedron, x: &[f64]) -> Result<Vec<f64>, PolytopeError> {
    if poly.n_rows() > ORACLE_MAX_ROWS {
        return Err(PolytopeError::TooManyRows {
            max: ORACLE_MAX_ROWS,
            got: poly.n_rows(),
        });
    }
    poly.check_point(x)?;
    let n = poly.dim();
    let m_eq = poly.n_eq();
    let ineq: Vec<usize> = (m_eq..poly.n_rows()).collect();
    let max_extra = n.saturating_sub(m_eq);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..=max_extra.min(ineq.len()) {
        for subset in ineq.iter().copied().combinations(k) {
            let rows: Vec<usize> = (0..m_eq).chain(subset).collect();
            let Some((y, lambda)) = solve_candidate(poly, &rows, x) else {
                continue;
            };
            let dual_ok = rows
                .iter()
                .zip(&lambda)
                .all(|(&r, &l)| r < m_eq || l >= -DUAL_TOL * (1.0 + dist(&y, x)));
            if !dual_ok || !poly.contains(&y, PRIMAL_TOL * (1.0 + max_abs(&y))) {
                continue;
            }
            let d = dist(&y, x);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd - 1e-12) {
                best = Some((d, y));
            }
        }
    }
    best.map(|(_, y)| y).ok_or(PolytopeError::Empty)
}

/// Closest point to `x` on the affine set of `rows`, with multipliers `λ`
/// such that `y = x + Σ λ_i a_i`. `None` when the rows are inconsistent.
fn solve_candidate(poly: &Polyhedron, rows: &[usize], x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = poly.dim();
    if rows.is_empty() {
        return Some((x.to_vec(), Vec::new()));
    }
    let a = DMatrix::from_fn(rows.len(), n, |i, j| poly.row(rows[i]).0[j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&r| poly.row(r).1));
    let xv = DVector::from_column_slice(x);
    // A Aᵀ λ = b - A x
    let gram = &a * a.transpose();
    let rhs = &b - &a * &xv;
    let lambda = gram.svd(true, true).solve(&rhs, 1e-12).ok()?;
    let y = &xv + a.transpose() * &lambda;
    let residual = (&a * &y - &b).amax();
    if residual > PRIMAL_TOL * (1.0 + b.amax()) {
        return None;
    }
    Some((y.as_slice().to_vec(), lambda.as_slice().to_vec()))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
