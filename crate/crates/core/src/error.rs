use thiserror::Error;

/// Errors produced by the compression, certificate, and audit operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero norm; a constant-zero attribute cannot be rescaled to squared norm n")]
    ZeroColumn(usize),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix is not symmetric: max |M - M^T| = {asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("family needs at least two members, or one member plus a population covariance")]
    TooFewMembers,

    #[error("p = {p} must be strictly smaller than n = {n}: a projection with p >= n does not protect the records")]
    DimensionOrder { n: usize, p: usize },

    #[error(
        "no accepted draw within {attempts} attempts; m = {m} vs the 2(C1+C2)ln(2np) = {min_m:.1} \
         floor for a rejection probability below 1/n^2"
    )]
    RetriesExhausted { attempts: usize, m: usize, min_m: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("interpolated precision matrix is indefinite at v = {0}; the inverse-covariance path leaves the cone")]
    IndefiniteAlongPath(f64),

    #[error("p = {0} exceeds the p <= 40 guard: the explicit Kronecker product needs p^4 memory")]
    TooLargeP(usize),

    #[error("eigengap at position {0} is below 1e-10; the spectral projector is not well defined")]
    DegenerateGap(usize),

    #[error("matrix entries must be exactly +1 or -1")]
    NotBinary,

    #[error("row index {index} out of range for {n} rows")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    /// True for failures of the numerics (degenerate spectra, indefinite
    /// matrices, exhausted rejection loops) as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::NotSymmetric { .. }
                | Error::DegenerateGap(_)
                | Error::RetriesExhausted { .. }
                | Error::IndefiniteAlongPath(_)
                | Error::ZeroColumn(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
