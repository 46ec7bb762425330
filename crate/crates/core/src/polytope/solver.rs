//! Dual active-set (Goldfarb–Idnani) solver for the least-distance problem
//!
//! ```text
//! min ½‖y - x‖²  s.t.  a_i·y = b_i (eq rows),  a_i·y ≥ b_i (ineq rows)
//! ```
//!
//! The iteration starts from the unconstrained minimiser `y = x` and adds
//! violated rows one at a time, dropping rows whose multipliers would turn
//! negative. It needs no feasible starting point and reports an empty
//! polyhedron when a violated row cannot be satisfied. Degenerate vertices
//! (more active rows than dimensions) are handled through the dependent-row
//! partial steps.

use nalgebra::{DMatrix, DVector};

use super::{dot, norm, PolytopeError, Polyhedron};

/// Feasibility tolerance, relative to the scale of each row.
const FEAS_TOL: f64 = 1e-11;
/// A row counts as linearly dependent on the active set when its residual
/// after removing the active span is below this fraction of its norm.
const DEP_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-12;

/// Result of a projection: the point and the rows active at it.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Global row indices of the final active set, in insertion order.
    pub active: Vec<usize>,
    /// Lagrange multipliers aligned with `active` (nonnegative on inequality
    /// rows; equality rows may carry either sign).
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

/// Rows to try first when looking for a violated constraint.
///
/// Typically the active set of the previous projection along a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    pub preferred: Vec<usize>,
}

impl From<&Projection> for WarmStart {
    fn from(p: &Projection) -> Self {
        WarmStart {
            preferred: p.active.clone(),
        }
    }
}

struct ActiveRow {
    idx: usize,
    normal: Vec<f64>,
    is_eq: bool,
    mult: f64,
}

/// Null-space component of `np` w.r.t. the active normals, and the
/// coefficients of `np` in the active basis.
fn decompose(active: &[ActiveRow], np: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = np.len();
    let q = active.len();
    if q == 0 {
        return (np.to_vec(), Vec::new());
    }
    let basis = DMatrix::from_fn(n, q, |i, j| active[j].normal[i]);
    let qr = basis.qr();
    let qm = qr.q();
    let rm = qr.r();
    let v = DVector::from_column_slice(np);
    let qtv = qm.transpose() * &v;
    let z = &v - &qm * &qtv;
    let r = rm
        .solve_upper_triangular(&qtv)
        .map(|r| r.as_slice().to_vec())
        .unwrap_or_else(|| vec![0.0; q]);
    (z.as_slice().to_vec(), r)
}

fn row_tol(normal: &[f64], offset: f64, y: &[f64]) -> f64 {
    let y_inf = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    FEAS_TOL * (1.0 + offset.abs() + norm(normal) * y_inf)
}

pub(super) fn solve(
    poly: &Polyhedron,
    x: &[f64],
    warm: Option<&WarmStart>,
) -> Result<Projection, PolytopeError> {
    let n = poly.dim();
    let m = poly.n_rows();
    let max_iter = 20 * (m + n) + 100;
    let mut iterations = 0usize;
    let mut y = x.to_vec();
    let mut active: Vec<ActiveRow> = Vec::with_capacity(n);

    // Equalities go in first and are never dropped.
    for idx in 0..poly.n_eq() {
        let (a, b, _) = poly.row(idx);
        let s = dot(a, &y) - b;
        let (normal, offset) = if s > 0.0 {
            (a.iter().map(|v| -v).collect::<Vec<_>>(), -b)
        } else {
            (a.to_vec(), b)
        };
        let (z, _) = decompose(&active, &normal);
        if norm(&z) <= DEP_TOL * norm(&normal) {
            if s.abs() <= row_tol(a, b, &y) {
                continue;
            }
            // Only equalities are active so far, and they cannot be dropped.
            return Err(PolytopeError::Empty);
        }
        add_row(
            &mut active,
            &mut y,
            idx,
            normal,
            offset,
            true,
            &mut iterations,
            max_iter,
        )?;
    }

    let preferred: &[usize] = warm.map(|w| w.preferred.as_slice()).unwrap_or(&[]);
    while let Some(p) = pick_violated(poly, &y, &active, preferred) {
        let (a, b, _) = poly.row(p);
        add_row(
            &mut active,
            &mut y,
            p,
            a.to_vec(),
            b,
            false,
            &mut iterations,
            max_iter,
        )?;
    }

    Ok(Projection {
        point: y,
        active: active.iter().map(|r| r.idx).collect(),
        multipliers: active
            .iter()
            .map(|r| {
                // Flipped equalities carry the opposite sign w.r.t. the stored row.
                let (a, _, _) = poly.row(r.idx);
                if r.is_eq && dot(a, &r.normal) < 0.0 {
                    -r.mult
                } else {
                    r.mult
                }
            })
            .collect(),
        iterations,
    })
}

/// Most violated inequality row (scaled by its norm), preferring warm-start
/// rows. Ties go to the lowest row index.
fn pick_violated(
    poly: &Polyhedron,
    y: &[f64],
    active: &[ActiveRow],
    preferred: &[usize],
) -> Option<usize> {
    let violation = |idx: usize| -> Option<f64> {
        let (a, b, is_eq) = poly.row(idx);
        if is_eq || active.iter().any(|r| r.idx == idx) {
            return None;
        }
        let s = dot(a, y) - b;
        (s < -row_tol(a, b, y)).then(|| -s / norm(a))
    };
    let best = |indices: &mut dyn Iterator<Item = usize>| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for idx in indices {
            if let Some(v) = violation(idx) {
                if best.is_none_or(|(bi, bv)| v > bv || (v == bv && idx < bi)) {
                    best = Some((idx, v));
                }
            }
        }
        best.map(|(i, _)| i)
    };
    let m = poly.n_rows();
    best(&mut preferred.iter().copied().filter(|&i| i < m))
        .or_else(|| best(&mut (poly.n_eq()..m)))
}

#[allow(clippy::too_many_arguments)]
fn add_row(
    active: &mut Vec<ActiveRow>,
    y: &mut [f64],
    idx: usize,
    normal: Vec<f64>,
    offset: f64,
    is_eq: bool,
    iterations: &mut usize,
    max_iter: usize,
) -> Result<(), PolytopeError> {
    let mut new_mult = 0.0;
    loop {
        *iterations += 1;
        if *iterations > max_iter {
            return Err(PolytopeError::NonConvergence(max_iter));
        }
        let s = dot(&normal, y) - offset;
        let (z, r) = decompose(active, &normal);

        // Primal (full) step length.
        let zn = dot(&z, &normal);
        let full = if norm(&z) > DEP_TOL * norm(&normal) && zn > 0.0 {
            Some((-s / zn).max(0.0))
        } else {
            None
        };

        // Dual (partial) step length: first inequality multiplier to hit zero.
        let mut partial: Option<(usize, f64)> = None;
        for (j, row) in active.iter().enumerate() {
            if row.is_eq || r[j] <= DUAL_TOL {
                continue;
            }
            let t = (row.mult / r[j]).max(0.0);
            if partial.is_none_or(|(_, bt)| t < bt) {
                partial = Some((j, t));
            }
        }

        let t = match (full, partial) {
            (None, None) => return Err(PolytopeError::Empty),
            (Some(tf), None) => tf,
            (None, Some((_, tp))) => tp,
            (Some(tf), Some((_, tp))) => tf.min(tp),
        };

        if full.is_some() {
            for (yi, zi) in y.iter_mut().zip(&z) {
                *yi += t * zi;
            }
        }
        for (row, rj) in active.iter_mut().zip(&r) {
            row.mult -= t * rj;
        }
        new_mult += t;

        match (full, partial) {
            (Some(tf), p) if p.is_none_or(|(_, tp)| tf <= tp) => {
                active.push(ActiveRow {
                    idx,
                    normal,
                    is_eq,
                    mult: new_mult,
                });
                return Ok(());
            }
            (_, Some((l, _))) => {
                active.remove(l);
            }
            _ => unreachable!("step selection covers all cases"),
        }
    }
}
