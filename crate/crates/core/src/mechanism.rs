//! The sanitizer: seeded Gaussian ensembles, compression, and the
//! truncation/rejection loop with its max-entry acceptance predicate.
//!
//! A draw is accepted when the compressed covariance X_c^T X_c / m stays
//! within `c * sqrt(ln(2np)/m) + delta_max` of the reference covariance in
//! max-entry distance. Rejected draws are regenerated with a fresh
//! independent stream and are never exposed.

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{CovarianceMatrix, DataMatrix};
use crate::streams::{derive_stream, domain, standard_normal_matrix, StreamId};

/// First tail constant, 4e / sqrt(6 pi), roughly 2.5044.
pub fn c1() -> f64 {
    4.0 * std::f64::consts::E / (6.0 * std::f64::consts::PI).sqrt()
}

/// Second tail constant, sqrt(8) e, roughly 7.6885.
pub fn c2() -> f64 {
    8.0_f64.sqrt() * std::f64::consts::E
}

/// Default acceptance constant sqrt(2 (C1 + C2)), roughly 4.5151.
pub fn default_c() -> f64 {
    (2.0 * (c1() + c2())).sqrt()
}

pub fn ln_2np(n: usize, p: usize) -> f64 {
    (2.0 * n as f64 * p as f64).ln()
}

/// Smallest m for which the rejection probability is guaranteed below 1/n^2:
/// 2 (C1 + C2) ln(2np).
pub fn min_m_for_truncation_bound(n: usize, p: usize) -> f64 {
    2.0 * (c1() + c2()) * ln_2np(n, p)
}

/// Configuration of the projection mechanism.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProjectionConfig {
    /// Output row count.
    pub m: usize,
    /// 64-bit master seed; every attempt derives its own stream from it.
    pub seed: u64,
    /// Cap on rejection-loop iterations. The expected retry count is about
    /// 1/(1 - 1/n^2), so exhaustion indicates misconfiguration, not bad luck.
    pub max_retries: usize,
    /// Acceptance constant; defaults to sqrt(2 (C1 + C2)).
    pub c_constant: f64,
}

impl ProjectionConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            seed,
            max_retries: 1000,
            c_constant: default_c(),
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c_constant = c;
        self
    }

    pub fn with_max_retries(mut self, max_retries: usize) -> Self {
        self.max_retries = max_retries;
        self
    }
}

/// m x n matrix with i.i.d. N(0, 1/n) entries, deterministic in the stream.
pub fn sample_ensemble(n: usize, m: usize, stream: StreamId) -> Array2<f64> {
    debug_assert!(n >= 1 && m >= 1);
    let scale = 1.0 / (n as f64).sqrt();
    let mut phi = standard_normal_matrix(m, n, stream);
    phi.mapv_inplace(|v| v * scale);
    phi
}

/// Acceptance radius c * sqrt(ln(2np)/m) + delta_max.
pub fn acceptance_radius(n: usize, p: usize, m: usize, delta_max: f64, c: f64) -> f64 {
    debug_assert!(n >= 1 && p >= 1 && m >= 1);
    debug_assert!(delta_max >= 0.0);
    c * (ln_2np(n, p) / m as f64).sqrt() + delta_max
}

/// Compressed covariance X_c^T X_c / m.
pub fn compressed_covariance(xc: &ArrayView2<f64>) -> Array2<f64> {
    let m = xc.nrows() as f64;
    let mut g = xc.t().dot(xc);
    g.mapv_inplace(|v| v / m);
    g
}

/// Acceptance predicate: max-entry deviation of X_c^T X_c / m from the
/// reference, compared against the radius. Returns (accepted, deviation).
pub fn accepts(
    xc: &Array2<f64>,
    sigma_ref: &CovarianceMatrix,
    radius: f64,
) -> Result<(bool, f64)> {
    if xc.ncols() != sigma_ref.p() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0} columns to match the {0} x {0} reference", sigma_ref.p()),
            got: format!("{} columns", xc.ncols()),
        });
    }
    let gram = compressed_covariance(&xc.view());
    let deviation = gram
        .iter()
        .zip(sigma_ref.entries().iter())
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    Ok((deviation <= radius, deviation))
}

/// An accepted m x p compressed output with its provenance.
#[derive(Debug, Clone)]
pub struct CompressedMatrix {
    pub entries: Array2<f64>,
    /// Content hash of the input matrix.
    pub source_fingerprint: String,
    /// Stream identifier of the accepted draw.
    pub seed_used: u64,
    /// Number of rejected draws before acceptance.
    pub retries: usize,
    /// Acceptance radius used.
    pub threshold: f64,
    /// Max-entry deviation the accepted draw achieved.
    pub achieved_deviation: f64,
}

impl CompressedMatrix {
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn p(&self) -> usize {
        self.entries.ncols()
    }
}

/// Draws fresh ensembles until one lands inside the acceptance region.
///
/// Attempt i uses its own stream derived from the master seed, so the result
/// is fully determined by (inputs, config) and rejected draws never leave
/// this function.
pub fn sanitize(
    x: &DataMatrix,
    sigma_ref: &CovarianceMatrix,
    cfg: &ProjectionConfig,
    delta_max: f64,
) -> Result<CompressedMatrix> {
    if !x.is_normalized() {
        return Err(Error::PreconditionFailed(
            "input columns must be normalized to squared norm n before compression".into(),
        ));
    }
    let (n, p) = (x.n(), x.p());
    if p >= n {
        return Err(Error::DimensionOrder { n, p });
    }
    if sigma_ref.p() != p {
        return Err(Error::ShapeMismatch {
            expected: format!("{p} x {p} reference covariance"),
            got: format!("{0} x {0}", sigma_ref.p()),
        });
    }
    if !sigma_ref.is_pd() {
        return Err(Error::NotPositiveDefinite(
            "reference covariance must be positive definite".into(),
        ));
    }
    if cfg.m == 0 || cfg.max_retries == 0 {
        return Err(Error::PreconditionFailed(
            "m and max_retries must be at least 1".into(),
        ));
    }
    if !(delta_max >= 0.0) {
        return Err(Error::PreconditionFailed(
            "delta_max must be nonnegative".into(),
        ));
    }
    let radius = acceptance_radius(n, p, cfg.m, delta_max, cfg.c_constant);
    for attempt in 0..cfg.max_retries {
        let stream = derive_stream(cfg.seed, &[domain::SANITIZE, attempt as u64]);
        let phi = sample_ensemble(n, cfg.m, stream);
        let xc = phi.dot(x.entries());
        let (ok, deviation) = accepts(&xc, sigma_ref, radius)?;
        if ok {
            return Ok(CompressedMatrix {
                entries: xc,
                source_fingerprint: x.fingerprint(),
                seed_used: stream.id(),
                retries: attempt,
                threshold: radius,
                achieved_deviation: deviation,
            });
        }
    }
    Err(Error::RetriesExhausted {
        attempts: cfg.max_retries,
        m: cfg.m,
        min_m: min_m_for_truncation_bound(n, p),
    })
}
