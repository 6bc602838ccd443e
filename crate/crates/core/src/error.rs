use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-binary variable {var} (cardinality {card})")]
    NonBinaryVariable { var: usize, card: usize },

    #[error("non-positive or non-finite table entry {value} in factor {factor}")]
    BadTableEntry { factor: usize, value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("enumeration cap exceeded: {vars} variables > cap {cap}")]
    CapExceeded { vars: usize, cap: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quantization too coarse: q must be at least 1")]
    QuantizationTooCoarse,

    #[error("auxiliary bit budget exceeded: need {needed} bits, cap {cap}")]
    AuxBitsExceeded { needed: usize, cap: usize },

    #[error("oracle bit budget exceeded: {bits} bits > cap {cap}")]
    OracleBudget { bits: usize, cap: usize },

    #[error("sampler exhausted {attempts} attempts without a successful draw")]
    MaxAttemptsExhausted { attempts: usize },

    #[error("matrix is not symmetric positive definite (breakdown at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("projection did not converge within {iters} iterations")]
    ProjectionDiverged { iters: usize },

    #[error("penalty must be positive")]
    NonPositivePenalty,

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
