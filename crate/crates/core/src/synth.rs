//! Seeded generators for randomized certificate sweeps and demos: sign
//! matrices, unit vectors, and positive-definite covariance pairs.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::Result;
use crate::linalg;
use crate::matrix::{CovarianceMatrix, DataMatrix};
use crate::streams::{derive_stream, standard_normal_matrix, StreamId};

/// n x p matrix with entries drawn uniformly from {-1, +1}. Such matrices are
/// normalized by construction.
pub fn random_sign_matrix(n: usize, p: usize, stream: StreamId) -> Result<DataMatrix> {
    let mut rng = stream.rng();
    let data: Vec<f64> = (0..n * p)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    DataMatrix::new(Array2::from_shape_vec((n, p), data).expect("length n*p"))
}

/// Two independent unit vectors in R^n.
pub fn random_unit_pair(n: usize, stream: StreamId) -> (Array1<f64>, Array1<f64>) {
    let g = standard_normal_matrix(2, n, stream);
    let mut x = g.row(0).to_owned();
    let mut y = g.row(1).to_owned();
    let nx = x.dot(&x).sqrt();
    let ny = y.dot(&y).sqrt();
    x.mapv_inplace(|v| v / nx);
    y.mapv_inplace(|v| v / ny);
    (x, y)
}

/// Random p x p positive-definite matrix with eigenvalues in [lo, hi].
pub fn random_spd(p: usize, lo: f64, hi: f64, stream: StreamId) -> Array2<f64> {
    assert!(0.0 < lo && lo <= hi);
    let g = standard_normal_matrix(p, p, stream);
    let sym = linalg::symmetrize(&g.view());
    let eig = crate::matrix::sym_eig(&sym.view()).expect("symmetrized Gaussian matrix");
    let q = eig.vectors;
    let mut rng = derive_stream(stream.id(), &[0x51]).rng();
    let diag: Vec<f64> = (0..p).map(|_| rng.random_range(lo..=hi)).collect();
    let lam = Array2::from_diag(&Array1::from(diag));
    let spd = q.dot(&lam).dot(&q.t());
    linalg::symmetrize(&spd.view())
}

/// A positive-definite pair (Sigma_ref, Sigma_other) built as a base matrix
/// plus a symmetric perturbation rescaled so that the spectral norm of the
/// perturbation is `delta_spectral`.
pub fn random_spd_pair(
    p: usize,
    delta_spectral: f64,
    stream: StreamId,
) -> Result<(CovarianceMatrix, CovarianceMatrix)> {
    let base = random_spd(p, 0.6, 1.6, stream);
    let g = standard_normal_matrix(p, p, derive_stream(stream.id(), &[0x52]));
    let mut pert = linalg::symmetrize(&g.view());
    let norms = crate::matrix::matrix_norms(&pert.view())?;
    if norms.spectral > 0.0 {
        let scale = delta_spectral / norms.spectral;
        pert.mapv_inplace(|v| v * scale);
    }
    let other = &base - &pert;
    let s1 = CovarianceMatrix::from_matrix(&base.view(), p)?;
    let s2 = CovarianceMatrix::from_matrix(&other.view(), p)?;
    Ok((s1, s2))
}
