use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rank {rank} is below the minimum {min} for family {family}")]
    UnsupportedRank { family: char, rank: usize, min: usize },
    #[error("commutator of basis elements {a} and {b} leaves the span (residual {residual:e})")]
    ClosureViolation { a: usize, b: usize, residual: f64 },
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("bad flag: {0}")]
    BadFlag(String),
    #[error("unimplemented case: {0}")]
    UnimplementedCase(String),
    #[error("generator {index} does not preserve the tangent space (leak {leak:e})")]
    GeneratorMismatch { index: usize, leak: f64 },
    #[error("metric is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("no closed-form catalog entry for {0}")]
    NoCatalogEntry(String),
    #[error("{params} metric parameters exceed the solver limit of {limit}")]
    TooManyParameters { params: usize, limit: usize },
    #[error("solution count changed under grid refinement: {coarse} at 21 points, {fine} at 41")]
    ConvergenceGap { coarse: usize, fine: usize },
    #[error("cannot parse flag spec '{input}': {reason}")]
    Parse { input: String, reason: String },
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
