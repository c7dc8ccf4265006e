//! Distances and regularity checks over a family of databases sharing n and
//! p: row differences, the max-entry covariance metric, the family-wide
//! perturbation bound, and the covariance/inverse-covariance perturbation
//! pair with its norm inequalities.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{
    empirical_covariance, matrix_norms, CovarianceMatrix, DataMatrix, MatrixNorms,
};

/// A set of databases sharing n and p, all normalized, with one designated
/// reference member and the family-wide max-entry covariance bound.
#[derive(Debug, Clone)]
pub struct DatabaseFamily {
    members: Vec<DataMatrix>,
    covariances: Vec<CovarianceMatrix>,
    reference_index: usize,
    delta_max_pairwise: f64,
    population_sigma: Option<CovarianceMatrix>,
}

impl DatabaseFamily {
    pub fn new(
        members: Vec<DataMatrix>,
        reference_index: usize,
        population_sigma: Option<Array2<f64>>,
    ) -> Result<Self> {
        if members.is_empty() || (members.len() < 2 && population_sigma.is_none()) {
            return Err(Error::TooFewMembers);
        }
        let (n, p) = (members[0].n(), members[0].p());
        for (i, m) in members.iter().enumerate() {
            if (m.n(), m.p()) != (n, p) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} x {p} for every member"),
                    got: format!("{} x {} at member {i}", m.n(), m.p()),
                });
            }
            if !m.is_normalized() {
                return Err(Error::PreconditionFailed(format!(
                    "family member {i} is not normalized: every column must have squared norm n"
                )));
            }
        }
        if reference_index >= members.len() {
            return Err(Error::IndexOutOfRange {
                index: reference_index,
                n: members.len(),
            });
        }
        let covariances = members
            .iter()
            .map(|m| empirical_covariance(m, n))
            .collect::<Result<Vec<_>>>()?;
        let mut delta_max_pairwise = 0.0_f64;
        for i in 0..covariances.len() {
            for j in (i + 1)..covariances.len() {
                delta_max_pairwise =
                    delta_max_pairwise.max(max_entry_distance(&covariances[i], &covariances[j]));
            }
        }
        let population_sigma = match population_sigma {
            Some(s) => {
                if s.nrows() != p || s.ncols() != p {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{p} x {p} population covariance"),
                        got: format!("{} x {}", s.nrows(), s.ncols()),
                    });
                }
                Some(CovarianceMatrix::from_matrix(&s.view(), n)?)
            }
            None => None,
        };
        Ok(Self {
            members,
            covariances,
            reference_index,
            delta_max_pairwise,
            population_sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n(&self) -> usize {
        self.members[0].n()
    }

    pub fn p(&self) -> usize {
        self.members[0].p()
    }

    pub fn member(&self, i: usize) -> &DataMatrix {
        &self.members[i]
    }

    pub fn covariance(&self, i: usize) -> &CovarianceMatrix {
        &self.covariances[i]
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn reference(&self) -> &DataMatrix {
        &self.members[self.reference_index]
    }

    pub fn reference_covariance(&self) -> &CovarianceMatrix {
        &self.covariances[self.reference_index]
    }

    pub fn delta_max_pairwise(&self) -> f64 {
        self.delta_max_pairwise
    }

    pub fn population_sigma(&self) -> Option<&CovarianceMatrix> {
        self.population_sigma.as_ref()
    }
}

fn max_entry_distance(a: &CovarianceMatrix, b: &CovarianceMatrix) -> f64 {
    a.entries()
        .iter()
        .zip(b.entries().iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Number of rows in which the two matrices differ beyond 1e-12.
pub fn row_difference(x1: &DataMatrix, x2: &DataMatrix) -> Result<usize> {
    if (x1.n(), x1.p()) != (x2.n(), x2.p()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", x1.n(), x1.p()),
            got: format!("{} x {}", x2.n(), x2.p()),
        });
    }
    let count = x1
        .entries()
        .rows()
        .into_iter()
        .zip(x2.entries().rows())
        .filter(|(a, b)| a.iter().zip(b.iter()).any(|(u, v)| (u - v).abs() > 1e-12))
        .count();
    Ok(count)
}

/// Max-entry distance between the two empirical covariances; the metric the
/// acceptance region and the family bound are phrased in.
pub fn covariance_distance_v(x1: &DataMatrix, x2: &DataMatrix) -> Result<f64> {
    if (x1.n(), x1.p()) != (x2.n(), x2.p()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", x1.n(), x1.p()),
            got: format!("{} x {}", x2.n(), x2.p()),
        });
    }
    if !x1.is_normalized() || !x2.is_normalized() {
        return Err(Error::PreconditionFailed(
            "both matrices must be normalized before comparing covariances".into(),
        ));
    }
    let s1 = empirical_covariance(x1, x1.n())?;
    let s2 = empirical_covariance(x2, x2.n())?;
    Ok(max_entry_distance(&s1, &s2))
}

/// Family-wide perturbation bound.
///
/// Pairwise mode is the max of the metric over all unordered member pairs.
/// When a population covariance is present, returns twice the max distance of
/// any member to it, which dominates the pairwise value by the triangle
/// inequality.
pub fn compute_delta_max(family: &DatabaseFamily) -> Result<f64> {
    match family.population_sigma() {
        Some(star) => {
            let pop = 2.0
                * (0..family.len())
                    .map(|i| max_entry_distance(family.covariance(i), star))
                    .fold(0.0_f64, f64::max);
            // triangle inequality: twice the worst member-to-population
            // distance dominates every pairwise distance
            debug_assert!(pop >= family.delta_max_pairwise() - 1e-12);
            Ok(pop)
        }
        None => {
            if family.len() < 2 {
                return Err(Error::TooFewMembers);
            }
            Ok(family.delta_max_pairwise())
        }
    }
}

/// Covariance perturbation Delta = S1 - Sj and inverse perturbation
/// Gamma = Sj^{-1} - S1^{-1}, with the norm bounds both recorded.
#[derive(Debug, Clone)]
pub struct PerturbationPair {
    pub delta: Array2<f64>,
    pub gamma: Array2<f64>,
    pub delta_norms: MatrixNorms,
    pub gamma_frobenius: f64,
    /// p * max-entry(Delta); dominates ||Delta||_F.
    pub delta_frobenius_bound: f64,
    /// ||Delta||_F / (lambda_min(S1) lambda_min(Sj)); dominates ||Gamma||_F.
    pub gamma_frobenius_bound: f64,
    /// ||Gamma - Sj^{-1} Delta S1^{-1}||_F, the factorization identity residual.
    pub identity_residual: f64,
}

pub fn perturbation_pair(
    s1: &CovarianceMatrix,
    sj: &CovarianceMatrix,
) -> Result<PerturbationPair> {
    if s1.p() != sj.p() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0} x {0}", s1.p()),
            got: format!("{0} x {0}", sj.p()),
        });
    }
    if !s1.is_pd() || !sj.is_pd() {
        return Err(Error::NotPositiveDefinite(
            "both covariances must be positive definite to form the inverse perturbation".into(),
        ));
    }
    let delta = s1.entries() - sj.entries();
    let inv1 = s1.inverse()?;
    let invj = sj.inverse()?;
    let gamma = &invj - &inv1;
    let delta_norms = matrix_norms(&delta.view())?;
    let gamma_frobenius = linalg::frobenius(&gamma.view());
    let product = invj.dot(&delta).dot(&inv1);
    let identity_residual = linalg::frobenius(&(&gamma - &product).view());
    Ok(PerturbationPair {
        delta_frobenius_bound: s1.p() as f64 * delta_norms.max_entry,
        gamma_frobenius_bound: delta_norms.frobenius / (s1.eigmin() * sj.eigmin()),
        delta,
        gamma,
        delta_norms,
        gamma_frobenius,
        identity_residual,
    })
}

/// Regularity report: the 1/lambda_max floor, perturbation magnitudes, and
/// the eigenvalue floor lambda_min(Sj) >= lambda_min(S1) - ||Delta||_2.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub c_min: f64,
    pub inv_lambda_max_reference: f64,
    pub c_min_satisfied: bool,
    pub lambda_min_reference: f64,
    pub lambda_min_other: f64,
    pub delta_spectral: f64,
    pub gamma_spectral: Option<f64>,
    /// True when ||Delta||_2 < lambda_min(S1), the regime where the floor is
    /// informative.
    pub eigen_floor_applicable: bool,
    pub eigen_floor_holds: bool,
    /// lambda_min(Sj) / (lambda_min(S1) - ||Delta||_2); >= 1 when the floor
    /// holds. None when the denominator is not positive.
    pub eigen_floor_slack: Option<f64>,
}

pub fn check_assumption1(
    s1: &CovarianceMatrix,
    sj: &CovarianceMatrix,
    c_min: f64,
) -> AssumptionReport {
    let inv_lambda_max_reference = 1.0 / s1.eigmax();
    let delta = s1.entries() - sj.entries();
    let delta_spectral = matrix_norms(&delta.view())
        .map(|n| n.spectral)
        .unwrap_or(f64::NAN);
    let gamma_spectral = match (s1.inverse(), sj.inverse()) {
        (Ok(inv1), Ok(invj)) => {
            let gamma = &invj - &inv1;
            matrix_norms(&gamma.view()).ok().map(|n| n.spectral)
        }
        _ => None,
    };
    let floor = s1.eigmin() - delta_spectral;
    let eigen_floor_applicable = delta_spectral < s1.eigmin();
    let eigen_floor_holds = sj.eigmin() >= floor - 1e-12 * s1.eigmin().abs().max(1.0);
    let eigen_floor_slack = (floor > 0.0).then(|| sj.eigmin() / floor);
    AssumptionReport {
        c_min,
        inv_lambda_max_reference,
        c_min_satisfied: inv_lambda_max_reference >= c_min,
        lambda_min_reference: s1.eigmin(),
        lambda_min_other: sj.eigmin(),
        delta_spectral,
        gamma_spectral,
        eigen_floor_applicable,
        eigen_floor_holds,
        eigen_floor_slack,
    }
}
