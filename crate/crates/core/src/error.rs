use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("follower set is empty (phase-1 infeasible)")]
    EmptyPolytope,
    #[error("follower set is unbounded along coordinate {0}")]
    UnboundedPolytope(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("epsilon must be positive (got {0})")]
    NonPositiveEpsilon(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("vertex enumeration limited to n <= {limit} variables (got {n})")]
    VertexGuard { n: usize, limit: usize },
    #[error("grid too large: {0}")]
    GridGuard(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("expression error at {pos}: {msg}")]
    Expr { pos: usize, msg: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
