//! Approximate solutions of ill-posed pessimistic bilevel programs.
//!
//! The follower's objective `h` is perturbed to `h + ε f²`, which selects,
//! among the follower's optimal responses, the ones that are worst for the
//! leader. The perturbed bilevel program has a single-valued, continuous
//! upper objective and is solved by derivative-free search over the leader
//! box. As `ε ↓ 0` the penalized values increase monotonically toward the
//! value of the three-level pessimistic problem, which the [`oracle`] module
//! computes by brute force on small instances.
//!
//! Module map:
//! - [`model`]: scalar fields, polytopes, problems, validation and the
//!   built-in problem registry.
//! - [`lower_solver`]: simplex, vertex enumeration and Frank–Wolfe over
//!   `C = {x : Ax = b, x ≥ 0}`.
//! - [`selection`]: the penalized selection map and its upper value.
//! - [`upper_solver`]: compass search over the leader box.
//! - [`continuation`]: ε schedules, traces, monotonicity and extrapolation.
//! - [`oracle`]: brute-force lower sets, pessimistic selection and the
//!   three-level problem.
//! - [`diagnostics`]: certificates, strong-slope bounds and rate fits.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod diagnostics;
mod error;
pub mod lower_solver;
pub mod model;
pub mod oracle;
pub mod report;
pub mod sampling;
pub mod selection;
pub mod upper_solver;

pub use error::{Error, Result};
pub use model::{BilevelProblem, BoxSet, Polytope, ScalarField, Structure};
pub use selection::Sign;

pub(crate) mod linalg {
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    pub fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}
