use thiserror::Error;

use crate::model::ModelDiagnostics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix row {row} has length {len}, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("matrix is not lower triangular with positive diagonal: entry ({row}, {col})")]
    NotLtp { row: usize, col: usize },
    #[error("zero matrix where an Ltp matrix is required")]
    ZeroMatrix,
    #[error("empty collection")]
    EmptyCollection,
    #[error("tie epsilon must be positive and finite, got {0}")]
    BadTieEpsilon(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrefsError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("unknown event id {0:?}")]
    UnknownEvent(String),
    #[error("mixing weight {0} outside [0, 1]")]
    BadMixWeight(String),
    #[error("discount {0} outside (0, 1]")]
    BadDiscount(String),
    #[error("reward multiplier of non-terminal event {id:?} must be positive, got {gamma}")]
    NonPositiveMultiplier { id: String, gamma: String },
    #[error("invalid lottery: {0}")]
    InvalidLottery(String),
    #[error("outcome {0} is not classified")]
    Unclassified(String),
    #[error("axiom check needs {0}")]
    MissingAxiomInput(&'static str),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("model has {} violation(s)", .0.violations.len())]
    Invalid(ModelDiagnostics),
    #[error(transparent)]
    Prefs(#[from] PrefsError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("model violates the strict diagonal bound: {0} violation(s)")]
    Assumption2(usize),
    #[error("dimension {dim} did not converge within {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { dim: usize, sweeps: usize, residual: f64 },
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("policy is invalid: {0}")]
    BadPolicy(String),
    #[error("horizon must be at least 1")]
    BadHorizon,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {count} > {limit}")]
    Guardrail { count: u128, limit: u128 },
    #[error("singular evaluation system for policy {0:?}")]
    Singular(Vec<String>),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("grid parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("target is unreachable from start")]
    Unreachable,
    #[error("risk bound {delta} is below the minimum achievable risk {min_risk}")]
    Infeasible { delta: f64, min_risk: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
