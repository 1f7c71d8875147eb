use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix has an all-zero row at index {0}")]
    ZeroRow(usize),

    #[error("structurally singular matrix: columns {columns:?} can only reach rows {rows:?}")]
    StructurallySingular { columns: Vec<usize>, rows: Vec<usize> },

    #[error("dense oracle limit exceeded: n = {n} > cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("factorization breakdown at level {level}: {reason}")]
    FactorBreakdown { level: usize, reason: String },

    #[error("singular pivot block encountered: {0}")]
    SingularPivot(String),

    #[error("basis is not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("unusable projected preconditioner: {0}")]
    UnusablePreconditioner(String),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("matrix market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
