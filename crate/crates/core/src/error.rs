use thiserror::Error;

/// Errors raised across dataset ingestion, graph construction, eigen-analysis
/// and mitigation planning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid {what}: {message}")]
    InvalidInput { what: &'static str, message: String },

    #[error("distribution not normalized: {context} sums to {sum}")]
    NotNormalized { context: String, sum: f64 },

    #[error("unknown line id {0}")]
    UnknownLine(u32),

    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),

    #[error("column {column} sums to {sum}, expected 1")]
    ColumnSum { column: usize, sum: f64 },

    #[error("eigenpair residual {residual:e} exceeds bound for lambda = {re}{im:+}i")]
    EigenResidual { re: f64, im: f64, residual: f64 },

    #[error("eigen iteration failed to converge for trailing block of size {0}")]
    EigenNoConvergence(usize),

    #[error("modal expansion unavailable; use propagate")]
    ModalExpansionUnavailable,

    #[error("not a conjugate-pair mode (lambda = {re}{im:+}i)")]
    NotConjugatePair { re: f64, im: f64 },

    #[error("no transient positive mode in the spectrum")]
    NoTransientPositiveMode,

    #[error("no transient complex mode in the spectrum")]
    NoTransientComplexMode,

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
