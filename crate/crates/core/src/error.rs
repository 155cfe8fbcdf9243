use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum ScatterError {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural hypothesis on the potential or spectral window is violated.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// `1 + F` is numerically singular at the requested spectral point.
    #[error("singular system: condition estimate {condition:.3e} exceeds {threshold:.1e}")]
    Singular { condition: f64, threshold: f64 },

    /// The approximate-inverse certificate did not close (`r1` or `r2` >= 1).
    #[error("approximate-inverse certificate failed: r1 = {r1:.4e}, r2 = {r2:.4e}")]
    CertificateFailure { r1: f64, r2: f64 },

    /// A tracked eigenvalue branch left the admissible energy window.
    #[error("eigenvalue branch lost: {0}")]
    EigenvalueLost(String),

    /// The propagation grid cannot resolve the requested energies or step.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Requested times exceed the periodic wraparound horizon.
    #[error("horizon exceeded: t = {t} > {horizon:.4}")]
    Horizon { t: f64, horizon: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed matrix dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScatterError>;
