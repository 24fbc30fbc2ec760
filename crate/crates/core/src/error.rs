use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("all pivots fell below the rank threshold")]
    Degenerate,
    #[error("factorization has rank {rank} < order {order}")]
    RankDeficient { rank: usize, order: usize },
    #[error("triangular matrix is singular at diagonal {index} (value {value:e})")]
    Singular { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompactError {
    #[error("pair buffer is empty")]
    EmptyBuffer,
    #[error("step vector has zero norm")]
    ZeroStep,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("step is linearly dependent on previous steps (c^T s = {0:e})")]
    DependentStep(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitError {
    #[error("ratio denominator is zero")]
    ZeroDenominator,
    #[error("pair buffer is empty")]
    EmptyBuffer,
    #[error("unknown initialization option '{0}'")]
    UnknownOption(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubproblemError {
    #[error("trust-region radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("gradient has non-finite entries")]
    NonFiniteGradient,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("secular equation not solved after {iters} Newton iterations (sigma = {sigma:e}, |p| = {pnorm:e}, delta = {delta:e})")]
    NewtonStalled { iters: usize, sigma: f64, pnorm: f64, delta: f64 },
    #[error("secular Newton start is infeasible: {0}")]
    BadStart(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("problem dimension must be at least 1")]
    EmptyProblem,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension {0} is invalid: must be >= 4 and divisible by 4")]
    InvalidDimension(usize),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid grid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("no run records")]
    EmptyRecords,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}
