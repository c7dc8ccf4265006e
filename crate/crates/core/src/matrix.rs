//! Dense matrix primitives with explicit numerical contracts: column
//! normalization, empirical covariance, norms, symmetric eigendecomposition,
//! and positive-definite log-determinants.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance on squared column norms for the `normalized` flag.
pub const NORMALIZATION_RTOL: f64 = 1e-10;

/// An n x p data matrix; rows are records, columns are attributes.
///
/// When `normalized` is set every column satisfies ||col||^2 = n within
/// [`NORMALIZATION_RTOL`], which every downstream bound assumes.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    entries: Array2<f64>,
    normalized: bool,
}

impl DataMatrix {
    /// Wraps a raw matrix, detecting whether its columns are already
    /// normalized. Requires n >= 1, p >= 1 and finite entries.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (n, p) = entries.dim();
        if n == 0 || p == 0 {
            return Err(Error::ShapeMismatch {
                expected: "n >= 1 and p >= 1".into(),
                got: format!("{n} x {p}"),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::PreconditionFailed(
                "data matrix contains non-finite entries".into(),
            ));
        }
        let normalized = columns_normalized(&entries.view());
        Ok(Self {
            entries,
            normalized,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// FNV-1a content hash over the dimensions and raw entry bytes.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut absorb = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        };
        absorb(&(self.n() as u64).to_le_bytes());
        absorb(&(self.p() as u64).to_le_bytes());
        for v in self.entries.iter() {
            absorb(&v.to_le_bytes());
        }
        format!("{h:016x}")
    }
}

fn columns_normalized(m: &ArrayView2<f64>) -> bool {
    let n = m.nrows() as f64;
    (0..m.ncols()).all(|j| {
        let sq: f64 = m.column(j).iter().map(|v| v * v).sum();
        (sq - n).abs() <= NORMALIZATION_RTOL * n
    })
}

/// Rescales every column to squared norm n, preserving its direction.
pub fn normalize_columns(raw: &Array2<f64>) -> Result<DataMatrix> {
    let (n, p) = raw.dim();
    if n == 0 || p == 0 {
        return Err(Error::ShapeMismatch {
            expected: "n >= 1 and p >= 1".into(),
            got: format!("{n} x {p}"),
        });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::PreconditionFailed(
            "data matrix contains non-finite entries".into(),
        ));
    }
    let mut out = raw.clone();
    let nf = n as f64;
    for j in 0..p {
        let sq: f64 = out.column(j).iter().map(|v| v * v).sum();
        if sq <= f64::MIN_POSITIVE {
            return Err(Error::ZeroColumn(j));
        }
        let scale = (nf / sq).sqrt();
        if !scale.is_finite() {
            return Err(Error::ZeroColumn(j));
        }
        for v in out.column_mut(j) {
            *v *= scale;
        }
    }
    Ok(DataMatrix {
        entries: out,
        normalized: true,
    })
}

/// Frobenius norm, spectral norm (largest singular value), and largest
/// absolute entry of a square matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixNorms {
    pub frobenius: f64,
    pub spectral: f64,
    pub max_entry: f64,
}

pub fn matrix_norms(m: &ArrayView2<f64>) -> Result<MatrixNorms> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{} x {}", m.nrows(), m.ncols()),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::PreconditionFailed(
            "matrix contains non-finite entries".into(),
        ));
    }
    let frobenius = linalg::frobenius(m);
    let max_entry = linalg::max_abs_entry(m);
    let spectral = if frobenius == 0.0 {
        0.0
    } else {
        // largest singular value via the Gram spectrum
        let gram = m.t().dot(m);
        let (vals, _) = linalg::jacobi_eigh(&gram.view());
        vals[0].max(0.0).sqrt()
    };
    Ok(MatrixNorms {
        frobenius,
        spectral,
        max_entry,
    })
}

/// Eigenvalues in descending order with orthonormal eigenvectors as columns.
/// The first component of each eigenvector above noise level is positive.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

pub fn sym_eig(m: &ArrayView2<f64>) -> Result<SymEig> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{} x {}", m.nrows(), m.ncols()),
        });
    }
    let asymmetry = linalg::max_asymmetry(m);
    let tolerance = 1e-8 * (1.0 + linalg::max_abs_entry(m));
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry,
            tolerance,
        });
    }
    let sym = linalg::symmetrize(m);
    let (values, vectors) = linalg::jacobi_eigh(&sym.view());
    Ok(SymEig { values, vectors })
}

/// A p x p empirical covariance X^T X / divisor with cached spectral facts.
///
/// Symmetrized as (M + M^T)/2 on construction; `logdet` is present only when
/// the smallest eigenvalue is positive and the Cholesky factorization
/// succeeds.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: Array2<f64>,
    source_n: usize,
    eigmin: f64,
    eigmax: f64,
    logdet: Option<f64>,
    chol: Option<Array2<f64>>,
}

impl CovarianceMatrix {
    /// Builds from an (almost) symmetric matrix; `source_n` records the
    /// divisor used to form it.
    pub fn from_matrix(m: &ArrayView2<f64>, source_n: usize) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{} x {}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::PreconditionFailed(
                "covariance contains non-finite entries".into(),
            ));
        }
        let entries = linalg::symmetrize(m);
        let (values, _) = linalg::jacobi_eigh(&entries.view());
        let eigmax = values[0];
        let eigmin = *values.last().expect("p >= 1");
        let chol = linalg::cholesky(&entries.view());
        let logdet = match (&chol, eigmin > 0.0) {
            (Some(l), true) => Some(2.0 * (0..l.nrows()).map(|i| l[[i, i]].ln()).sum::<f64>()),
            _ => None,
        };
        Ok(Self {
            entries,
            source_n,
            eigmin,
            eigmax,
            logdet,
            chol,
        })
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    pub fn eigmin(&self) -> f64 {
        self.eigmin
    }

    pub fn eigmax(&self) -> f64 {
        self.eigmax
    }

    /// Spectral norm; eigmax for the positive-semidefinite case, guarded
    /// against tiny negative noise eigenvalues.
    pub fn spectral_norm(&self) -> f64 {
        self.eigmax.abs().max(self.eigmin.abs())
    }

    pub fn is_pd(&self) -> bool {
        self.eigmin > 0.0 && self.chol.is_some()
    }

    pub fn logdet(&self) -> Option<f64> {
        self.logdet
    }

    pub(crate) fn chol(&self) -> Result<&Array2<f64>> {
        self.chol.as_ref().ok_or_else(|| {
            Error::NotPositiveDefinite(format!(
                "covariance with eigmin = {:.3e} has no Cholesky factor (singular or indefinite data, p >= n?)",
                self.eigmin
            ))
        })
    }

    /// (L L^T)^{-1} via the cached factor.
    pub fn inverse(&self) -> Result<Array2<f64>> {
        Ok(linalg::inverse_from_cholesky(self.chol()?))
    }

    /// x^T Sigma^{-1} x without forming the inverse.
    pub fn quad_form_inv(&self, x: &ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.p() {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {}", self.p()),
                got: format!("length {}", x.len()),
            });
        }
        Ok(linalg::quad_form_from_cholesky(self.chol()?, x))
    }
}

/// X^T X / divisor as a [`CovarianceMatrix`].
pub fn empirical_covariance(x: &DataMatrix, divisor: usize) -> Result<CovarianceMatrix> {
    if divisor == 0 {
        return Err(Error::PreconditionFailed("divisor must be positive".into()));
    }
    let gram = x.entries().t().dot(x.entries());
    let scaled = gram.mapv(|v| v / divisor as f64);
    CovarianceMatrix::from_matrix(&scaled.view(), divisor)
}

/// ln|M| via the positive-definite factorization.
pub fn log_det_pd(m: &CovarianceMatrix) -> Result<f64> {
    m.logdet().ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "log-determinant needs eigmin > 0, got {:.3e}",
            m.eigmin()
        ))
    })
}
