//! Linear and convex minimization over `C = {x : Ax = b, x ≥ 0}`.

mod frank_wolfe;
pub mod simplex;
mod vertices;

pub use frank_wolfe::{frank_wolfe_minimize, FieldAt, FwConfig, FwSolution, Objective, Quadratic};
pub use simplex::{LpSolution, LpStatus};
pub use vertices::{enumerate_vertices, MAX_ENUMERATION_DIM};

pub(crate) use vertices::independent_rows;

use crate::model::Polytope;

/// Vertex minimizer of `⟨c, x⟩` over `C`.
pub fn lp_minimize(c: &[f64], set: &Polytope) -> LpSolution {
    simplex::solve_standard_form(set.a(), set.b(), c)
}
