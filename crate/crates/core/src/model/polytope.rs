use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::lower_solver::simplex::{solve_standard_form, LpStatus};

/// The follower set `C = {x : Ax = b, x ≥ 0}`, verified nonempty and bounded.
#[derive(Debug)]
pub struct Polytope {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    n: usize,
    upper: Vec<f64>,
    vertices: OnceLock<Vec<Vec<f64>>>,
}

impl Clone for Polytope {
    fn clone(&self) -> Self {
        let vertices = OnceLock::new();
        if let Some(v) = self.vertices.get() {
            let _ = vertices.set(v.clone());
        }
        Self { a: self.a.clone(), b: self.b.clone(), n: self.n, upper: self.upper.clone(), vertices }
    }
}

impl Polytope {
    /// Validates the data by linear programming: phase 1 for emptiness,
    /// then `max xᵢ` for every coordinate.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, n: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension(format!("A has {} rows but b has {} entries", a.len(), b.len())));
        }
        if let Some(row) = a.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!("A row of length {} but n = {n}", row.len())));
        }
        if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Dimension("A and b must be finite".into()));
        }
        let zero = vec![0.0; n];
        if solve_standard_form(&a, &b, &zero).status == LpStatus::Infeasible {
            return Err(Error::EmptyPolytope);
        }
        let mut upper = Vec::with_capacity(n);
        for i in 0..n {
            let mut c = vec![0.0; n];
            c[i] = -1.0;
            let s = solve_standard_form(&a, &b, &c);
            match s.status {
                LpStatus::Optimal => upper.push(-s.value),
                LpStatus::Unbounded => return Err(Error::UnboundedPolytope(i)),
                LpStatus::Infeasible => return Err(Error::EmptyPolytope),
            }
        }
        Ok(Self { a, b, n, upper, vertices: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `max xᵢ` over the set, per coordinate.
    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    /// `‖Ax − b‖∞`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| (row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.n && x.iter().all(|v| *v >= -tol) && self.residual(x) <= tol
    }

    pub fn cached_vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.get().map(|v| v.as_slice())
    }

    pub(crate) fn vertex_cache(&self) -> &OnceLock<Vec<Vec<f64>>> {
        &self.vertices
    }

    /// The same set with equality rows permuted.
    pub fn permuted_rows(&self, order: &[usize]) -> Result<Polytope> {
        let a = order.iter().map(|&i| self.a[i].clone()).collect();
        let b = order.iter().map(|&i| self.b[i]).collect();
        Polytope::new(a, b, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_unbounded_are_distinct_errors() {
        let empty = Polytope::new(vec![vec![1.0, 1.0]], vec![-1.0], 2);
        assert!(matches!(empty, Err(Error::EmptyPolytope)));
        let ray = Polytope::new(vec![vec![1.0, -1.0]], vec![0.0], 2);
        assert!(matches!(ray, Err(Error::UnboundedPolytope(0))));
    }

    #[test]
    fn segment_bounds_and_membership() {
        let c = Polytope::new(vec![vec![1.0, 1.0]], vec![1.0], 2).unwrap();
        assert_eq!(c.upper_bounds(), &[1.0, 1.0]);
        assert!(c.contains(&[0.25, 0.75], 1e-9));
        assert!(!c.contains(&[0.5, 0.6], 1e-9));
        assert!(!c.contains(&[-0.1, 1.1], 1e-9));
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(Polytope::new(vec![vec![1.0]], vec![1.0], 2), Err(Error::Dimension(_))));
        assert!(matches!(Polytope::new(vec![vec![1.0, 1.0]], vec![], 2), Err(Error::Dimension(_))));
    }
}
