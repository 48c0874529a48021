use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {requested} exceeds the configured maximum of {max}")]
    SizeLimit { requested: usize, max: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("normalization violated: {0}")]
    Normalization(String),

    #[error("operation requires a {expected} initial state")]
    WrongKind { expected: &'static str },

    #[error("environment Hamiltonian is not diagonal (off-diagonal mass {0:.3e}); rotate to its eigenbasis first")]
    NotEnvEigenbasis(f64),

    #[error("quadrature grid too coarse: {steps} steps (need at least {min})")]
    Quadrature { steps: usize, min: usize },

    #[error("integration step produced non-finite values at step {0}")]
    Step(usize),

    #[error("Fock cutoff not converged: drift {drift:.3e} exceeds {bound:.1e}")]
    Cutoff { drift: f64, bound: f64 },

    #[error("Zassenhaus terms are only available up to order 4 (requested {0})")]
    UnsupportedOrder(usize),

    #[error("frequencies are not commensurable within denominator bound {bound}: {detail}")]
    Incommensurable { bound: u64, detail: String },

    #[error("not a density matrix: {0}")]
    NotAState(String),

    #[error("operation requires a product initial state")]
    NotProduct,

    #[error("empty sample grid")]
    EmptyGrid,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("operator set is not complete: {0}")]
    Completeness(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

impl Error {
    /// Variant name, for log lines and exit messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SizeLimit { .. } => "SizeLimit",
            Error::Shape(_) => "Shape",
            Error::Numerical(_) => "Numerical",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::Normalization(_) => "Normalization",
            Error::WrongKind { .. } => "WrongKind",
            Error::NotEnvEigenbasis(_) => "NotEnvEigenbasis",
            Error::Quadrature { .. } => "Quadrature",
            Error::Step(_) => "Step",
            Error::Cutoff { .. } => "Cutoff",
            Error::UnsupportedOrder(_) => "UnsupportedOrder",
            Error::Incommensurable { .. } => "Incommensurable",
            Error::NotAState(_) => "NotAState",
            Error::NotProduct => "NotProduct",
            Error::EmptyGrid => "EmptyGrid",
            Error::InsufficientData(_) => "InsufficientData",
            Error::Completeness(_) => "Completeness",
            Error::Contract(_) => "Contract",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}
