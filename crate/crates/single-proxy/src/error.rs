//! Error type shared by every module in the crate.

/// Coarse classification used by callers (e.g. a CLI) to map failures to exit
/// codes without matching on every variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller passed an invalid parameter value (bad flag, out-of-range knob).
    Usage,
    /// Input data is malformed, missing, or incompatible with the model.
    Data,
    /// A numerical routine failed (singular system, indefinite matrix,
    /// non-finite intermediate).
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Cholesky factorization failed even after the jitter escalation ladder.
    /// `jitter` is the largest diagonal shift that was attempted.
    #[error("matrix numerically singular (largest jitter tried: {jitter:.3e})")]
    Singular { jitter: f64 },

    /// An eigenvalue fell below the negative tolerance allowed for roundoff.
    #[error("matrix not positive semidefinite: eigenvalue {eigenvalue:.6e} below tolerance -{tolerance:.6e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("eigendecomposition failed to converge for a {dim}x{dim} matrix")]
    EigenFailed { dim: usize },

    #[error("non-finite value produced in {0}")]
    NonFinite(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_) => ErrorClass::Usage,
            Error::DimensionMismatch(_)
            | Error::InvalidData(_)
            | Error::Csv { .. }
            | Error::Io { .. } => ErrorClass::Data,
            Error::Singular { .. }
            | Error::NotPsd { .. }
            | Error::EigenFailed { .. }
            | Error::NonFinite(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
