use thiserror::Error;

/// Errors raised by the estimators and their supporting numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix has deficient column rank (column {column} is dependent on earlier columns)")]
    RankDeficient { column: usize },

    #[error("enumeration too large: {count} subsets exceeds cap {cap}")]
    TooLarge { count: u128, cap: u128 },

    #[error("threshold t={t} is unreachable: P(X >= t) is zero for HyperGeom(d={d}, k={k}, p={p})")]
    Unreachable { t: usize, d: usize, k: usize, p: usize },

    #[error("deflation step {step} is degenerate: the deflated submatrix has no positive eigenvalue")]
    DegenerateDeflation { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
