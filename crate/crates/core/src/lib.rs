//! Privacy-preserving compression of data matrices.
//!
//! An n x p data matrix with normalized columns is compressed to m x p by a
//! seeded Gaussian projection. Draws whose compressed covariance strays from a
//! reference beyond an acceptance radius are discarded and redrawn, which
//! caps the log density ratio between any two nearby databases. The crate
//! computes that ratio bound with its full term decomposition, PCA subspace
//! stability certificates for the compressed covariance, and Monte Carlo
//! audits for every bound it reports.

pub mod binary;
pub mod error;
pub mod family;
pub mod io;
mod linalg;
pub mod matrix;
pub mod mechanism;
pub mod pca;
pub mod privacy;
pub mod streams;
pub mod synth;

pub use binary::{make_neighbor, BinaryAlpha, BinaryDelta, BinaryInstance};
pub use error::{Error, Result};
pub use family::{
    check_assumption1, compute_delta_max, covariance_distance_v, perturbation_pair,
    row_difference, AssumptionReport, DatabaseFamily, PerturbationPair,
};
pub use matrix::{
    empirical_covariance, log_det_pd, matrix_norms, normalize_columns, sym_eig,
    CovarianceMatrix, DataMatrix, MatrixNorms, SymEig,
};
pub use mechanism::{
    acceptance_radius, accepts, sample_ensemble, sanitize, CompressedMatrix, ProjectionConfig,
};
pub use privacy::{
    alpha_bound, analytic_truncation_bound, concentration_audit, dominance_audit,
    estimate_truncation_prob, kron_a_bounds, kron_a_exact, kron_a_quadrature, log_density_ratio,
    regime_diagnostics, ConcentrationPoint, DominanceAudit, KronBounds, PrivacyReport,
    RegimeDiagnostics, TruncationEstimate,
};
pub use streams::{derive_stream, StreamId};
