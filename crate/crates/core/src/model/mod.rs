//! Problem data: fields, the follower polytope, the leader box, validation
//! and the built-in problem library.

pub mod expr;
mod field;
mod polytope;
mod problem;
mod registry;
mod validate;

pub use field::{shift_objective, ScalarField, Structure};
pub use polytope::Polytope;
pub use problem::{BilevelProblem, BoxSet, ProblemDoc};
pub use registry::{flat_segment, quad_band, registry_get, Registry};
pub use validate::{validate_problem, CheckResult, ValidationReport};
