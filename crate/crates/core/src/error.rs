use thiserror::Error;

use crate::grid::MultiIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid function value undefined at knot {0}")]
    UndefinedValue(MultiIndex),

    #[error("point {0:?} lies outside the region covered by the hat basis")]
    OutsideRegion(Vec<f64>),

    #[error("no stride vector with components <= {r_max} satisfies the compartmental inequalities (min eigenvalue of auxiliary tensor ~ {aux_min_eig:.6})")]
    NoFeasibleStride { r_max: usize, aux_min_eig: f64 },

    #[error("inconsistent stride table: axis {axis} uses strides {first} and {second}")]
    InconsistentStrides { axis: usize, first: usize, second: usize },

    #[error("stencil at knot {knot} reaches {target}, outside the closed domain")]
    StencilExitsDomain { knot: MultiIndex, target: MultiIndex },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),

    #[error("non-finite iterate after {iteration} iterations (row {row})")]
    NonFinite { iteration: usize, row: usize },

    #[error("system with {size} unknowns exceeds the direct solver limit of {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("singular matrix: pivot {pivot:e} in row {row}")]
    SingularMatrix { row: usize, pivot: f64 },

    #[error("iterative solver breakdown: {0}")]
    Breakdown(String),

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("structure check failed: {0}")]
    StructureViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
