use thiserror::Error;

use crate::optimizer::OptimizationResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("column {column} is not a contrast (coefficients sum to {sum})")]
    NotAContrast { column: usize, sum: f64 },

    #[error("treatment {row} does not appear in any contrast")]
    ZeroRow { row: usize },

    #[error("invalid comparison graph: {0}")]
    InvalidGraph(String),

    #[error("system has rank {rank} < {s} contrasts; use the pseudo-inverse route")]
    RankDeficient { rank: usize, s: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigenvalue {index} is not positive ({value:e})")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    #[error("invalid criterion parameter: {0}")]
    InvalidCriterion(String),

    #[error("comparison graph is not bipartite")]
    NotBipartite,

    #[error("rank {rank} is below v-1 = {needed}; uniform D-optimality is not guaranteed")]
    RankTooLow { rank: usize, needed: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("permutation does not leave QQ^T invariant")]
    NotInvariant,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible starting design: {0}")]
    InfeasibleStart(String),

    #[error("optimizer did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<OptimizationResult>),

    #[error("numerical check failed: {0}")]
    NumericalCheck(String),
}
