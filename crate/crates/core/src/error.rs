use thiserror::Error;

/// Errors raised by the key-rate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input: asymmetric matrix, duplicate labels, bad shapes.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical failure: {reason}\n{matrix}")]
    Numerical { reason: String, matrix: String },

    /// A symplectic eigenvalue fell below the vacuum bound.
    #[error("unphysical state: minimum symplectic eigenvalue {min_eigenvalue}")]
    Unphysical { min_eigenvalue: f64 },

    #[error("conditioning failed: {0}")]
    Conditioning(String),

    /// The network parameters do not describe a physical state.
    #[error("model error: {0}")]
    Model(String),

    /// Refusal of a request that would be too expensive or is unsupported.
    #[error("refused: {0}")]
    Guard(String),

    #[error("corrupt input: {0}")]
    CorruptInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numerical<T: std::fmt::Display>(reason: &str, m: &T) -> Self {
        Error::Numerical {
            reason: reason.to_string(),
            matrix: m.to_string(),
        }
    }
}
