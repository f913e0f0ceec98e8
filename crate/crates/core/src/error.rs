use thiserror::Error;

use crate::reconstruct::GraphRealization;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hurwitz: largest eigenvalue real part is {max_real_part:.3e}")]
    NotHurwitz { max_real_part: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("reduced order r = {r} must satisfy 1 <= r < n = {n}")]
    RankTooLarge { r: usize, n: usize },

    #[error("conic program is infeasible: {0}")]
    Infeasible(String),

    #[error("conic program is unbounded: {0}")]
    Unbounded(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("T factor violates T·Tᵀ = I − 𝟙𝟙ᵀ/r (defect {defect:.3e})")]
    NotOrthogonal { defect: f64 },

    #[error("realized stiffness is not an M-matrix: entry ({row}, {col}) = {value:.6e}")]
    NotMMatrix {
        row: usize,
        col: usize,
        value: f64,
        realization: Box<GraphRealization>,
    },

    #[error("no T factor reaches the sparsity targets (best residual {best_residual:.3e})")]
    NoSolutionFound { best_residual: f64 },

    #[error("stiffness matrix is indefinite (eigenvalue {min_eigenvalue:.3e})")]
    NotSemistable { min_eigenvalue: f64 },

    #[error("stiffness matrix has trivial kernel; use the asymptotically stable pipeline")]
    FullyStable,

    #[error("damping is not proportional (D ≠ αI + βK)")]
    NotProportional,

    #[error("graph stayed disconnected after {attempts} attempts")]
    DisconnectedAfterRetries { attempts: usize },

    #[error("network failed validation: {0}")]
    Validation(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: missing or malformed field `{field}`")]
    Schema { field: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
