//! Convex polyhedra, Euclidean projection onto them, and the innovation
//! operator `T = (1-β)·proj + β·(2·proj - Id)` built on that projection.

mod oracle;
mod solver;

pub use oracle::{project_oracle, ORACLE_MAX_ROWS};
pub use solver::{Projection, WarmStart};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("row has dimension {got}, polyhedron has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("constraint row has a zero normal")]
    ZeroNormal,
    #[error("constraint row has non-finite entries")]
    NonFinite,
    #[error("polyhedron is empty")]
    Empty,
    #[error("projection did not converge within {0} active-set iterations")]
    NonConvergence(usize),
    #[error("oracle supports at most {max} constraint rows, got {got}")]
    TooManyRows { max: usize, got: usize },
    #[error("beta must lie in [0, 1), got {0}")]
    InvalidBeta(f64),
}

/// `{x : a·x = b for eq rows, a·x ≥ b for ineq rows}`.
///
/// Rows are indexed globally with equality rows first, then inequality rows,
/// each in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    eq_normals: Vec<Vec<f64>>,
    eq_offsets: Vec<f64>,
    ineq_normals: Vec<Vec<f64>>,
    ineq_offsets: Vec<f64>,
}

impl Polyhedron {
    /// The whole space `R^dim` (no rows yet).
    pub fn empty(dim: usize) -> Self {
        Polyhedron {
            dim,
            eq_normals: Vec::new(),
            eq_offsets: Vec::new(),
            ineq_normals: Vec::new(),
            ineq_offsets: Vec::new(),
        }
    }

    /// Single halfspace `a·x ≥ b`.
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, PolytopeError> {
        let mut p = Self::empty(normal.len());
        p.push_ineq(normal, offset)?;
        Ok(p)
    }

    fn check_row(&self, normal: &[f64], offset: f64) -> Result<(), PolytopeError> {
        if normal.len() != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                got: normal.len(),
            });
        }
        if !offset.is_finite() || normal.iter().any(|a| !a.is_finite()) {
            return Err(PolytopeError::NonFinite);
        }
        if normal.iter().all(|&a| a == 0.0) {
            return Err(PolytopeError::ZeroNormal);
        }
        Ok(())
    }

    pub fn push_eq(&mut self, normal: Vec<f64>, offset: f64) -> Result<(), PolytopeError> {
        self.check_row(&normal, offset)?;
        self.eq_normals.push(normal);
        self.eq_offsets.push(offset);
        Ok(())
    }

    pub fn push_ineq(&mut self, normal: Vec<f64>, offset: f64) -> Result<(), PolytopeError> {
        self.check_row(&normal, offset)?;
        self.ineq_normals.push(normal);
        self.ineq_offsets.push(offset);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_eq(&self) -> usize {
        self.eq_normals.len()
    }

    pub fn n_rows(&self) -> usize {
        self.eq_normals.len() + self.ineq_normals.len()
    }

    pub fn eq_rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.eq_normals
            .iter()
            .map(Vec::as_slice)
            .zip(self.eq_offsets.iter().copied())
    }

    pub fn ineq_rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.ineq_normals
            .iter()
            .map(Vec::as_slice)
            .zip(self.ineq_offsets.iter().copied())
    }

    /// Row by global index (equalities first).
    pub fn row(&self, idx: usize) -> (&[f64], f64, bool) {
        let m_eq = self.n_eq();
        if idx < m_eq {
            (&self.eq_normals[idx], self.eq_offsets[idx], true)
        } else {
            let j = idx - m_eq;
            (&self.ineq_normals[j], self.ineq_offsets[j], false)
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim
            && self.eq_rows().all(|(a, b)| (dot(a, x) - b).abs() <= tol)
            && self.ineq_rows().all(|(a, b)| dot(a, x) - b >= -tol)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), PolytopeError> {
        if x.len() != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection of `x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, PolytopeError> {
        Ok(self.project_with(x, None)?.point)
    }

    /// Projection with an optional warm start; also returns the final active set.
    pub fn project_with(
        &self,
        x: &[f64],
        warm: Option<&WarmStart>,
    ) -> Result<Projection, PolytopeError> {
        self.check_point(x)?;
        solver::solve(self, x, warm)
    }

    /// Over-projection `2·proj(x) - x`.
    pub fn overproject(&self, x: &[f64]) -> Result<Vec<f64>, PolytopeError> {
        let p = self.project(x)?;
        Ok(p.iter().zip(x).map(|(pi, xi)| 2.0 * pi - xi).collect())
    }

    pub fn apply_t(&self, cfg: OperatorConfig, x: &[f64]) -> Result<Vec<f64>, PolytopeError> {
        let p = self.project(x)?;
        Ok(cfg.combine(&p, x))
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64, PolytopeError> {
        let p = self.project(x)?;
        Ok(dist(x, &p))
    }
}

/// Weight of the over-projection in `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    beta: f64,
}

impl OperatorConfig {
    pub fn new(beta: f64) -> Result<Self, PolytopeError> {
        if (0.0..1.0).contains(&beta) {
            Ok(OperatorConfig { beta })
        } else {
            Err(PolytopeError::InvalidBeta(beta))
        }
    }

    pub fn beta(self) -> f64 {
        self.beta
    }

    /// `T(x)` given `p = proj(x)`, evaluated as `p + β·(p - x)` so that
    /// members of the set map to themselves exactly.
    pub fn combine(self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let b = self.beta;
        p.iter().zip(x).map(|(pi, xi)| pi + b * (pi - xi)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TuGame;
    use approx::assert_abs_diff_eq;

    fn assert_vec_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    #[test]
    fn scalar_halfspace() {
        let h = Polyhedron::halfspace(vec![1.0], 0.0).unwrap();
        assert_eq!(h.project(&[-2.0]).unwrap(), vec![0.0]);
        assert_eq!(h.overproject(&[-2.0]).unwrap(), vec![2.0]);
        assert_eq!(h.distance(&[-2.0]).unwrap(), 2.0);
        assert_eq!(h.project(&[3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn members_are_fixed() {
        let core = TuGame::four_agent_example().core_polyhedron();
        let x = [4.0, 3.0, 0.0, 3.0];
        assert_eq!(core.project(&x).unwrap(), x.to_vec());
        assert_eq!(core.overproject(&x).unwrap(), x.to_vec());
        for beta in [0.0, 0.2, 0.8, 0.99] {
            let cfg = OperatorConfig::new(beta).unwrap();
            assert_eq!(core.apply_t(cfg, &x).unwrap(), x.to_vec());
        }
        assert_eq!(core.distance(&x).unwrap(), 0.0);
    }

    #[test]
    fn four_agent_core_is_a_point() {
        // Singleton lower bounds sum to v(I), so every point projects to them.
        let core = TuGame::four_agent_example().core_polyhedron();
        let p = core.project(&[10.0, 0.0, 0.0, 0.0]).unwrap();
        assert_vec_close(&p, &[4.0, 3.0, 0.0, 3.0], 1e-12);
        let cfg = OperatorConfig::new(0.8).unwrap();
        let t = core.apply_t(cfg, &[10.0, 0.0, 0.0, 0.0]).unwrap();
        assert_vec_close(&t, &[-0.8, 5.4, 0.0, 5.4], 1e-12);
    }

    #[test]
    fn beta_zero_is_projection() {
        let core = TuGame::four_agent_example().core_polyhedron();
        let x = [1.0, -2.0, 7.5, 3.3];
        let cfg = OperatorConfig::new(0.0).unwrap();
        assert_eq!(core.apply_t(cfg, &x).unwrap(), core.project(&x).unwrap());
    }

    #[test]
    fn beta_range() {
        assert!(OperatorConfig::new(0.0).is_ok());
        assert!(OperatorConfig::new(1.0).is_err());
        assert!(OperatorConfig::new(-0.1).is_err());
        assert!(OperatorConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn empty_polyhedron_is_reported() {
        let mut p = Polyhedron::empty(2);
        p.push_ineq(vec![1.0, 0.0], 1.0).unwrap();
        p.push_ineq(vec![-1.0, 0.0], 0.0).unwrap();
        assert_eq!(p.project(&[0.5, 0.0]), Err(PolytopeError::Empty));
        let empty = TuGame::from_pairs(2, &[(&[1], 1.0), (&[2], 1.0), (&[1, 2], 1.0)])
            .unwrap()
            .core_polyhedron();
        assert_eq!(empty.project(&[0.0, 0.0]), Err(PolytopeError::Empty));
    }

    #[test]
    fn rejects_bad_rows() {
        let mut p = Polyhedron::empty(2);
        assert_eq!(p.push_ineq(vec![0.0, 0.0], 1.0), Err(PolytopeError::ZeroNormal));
        assert!(matches!(
            p.push_eq(vec![1.0], 1.0),
            Err(PolytopeError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            p.project(&[1.0]),
            Err(PolytopeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut p = Polyhedron::empty(2);
        p.push_eq(vec![1.0, 1.0], 1.0).unwrap();
        p.push_eq(vec![2.0, 2.0], 2.0).unwrap();
        p.push_ineq(vec![1.0, 0.0], 0.0).unwrap();
        p.push_ineq(vec![1.0, 0.0], 0.0).unwrap();
        p.push_ineq(vec![0.0, 1.0], 0.0).unwrap();
        let y = p.project(&[-3.0, 1.0]).unwrap();
        assert_vec_close(&y, &[0.0, 1.0], 1e-12);
    }

    #[test]
    fn warm_start_gives_same_point() {
        let core = TuGame::from_pairs(3, &[(&[1], 1.0), (&[2], 1.0), (&[1, 2, 3], 6.0)])
            .unwrap()
            .core_polyhedron();
        let a = core.project_with(&[5.0, -4.0, 1.0], None).unwrap();
        let warm = WarmStart::from(&a);
        let b = core.project_with(&[5.5, -3.0, 0.5], Some(&warm)).unwrap();
        let c = core.project(&[5.5, -3.0, 0.5]).unwrap();
        assert_vec_close(&b.point, &c, 1e-12);
    }
}
