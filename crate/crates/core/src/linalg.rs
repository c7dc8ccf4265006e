//! Dense symmetric kernels: cyclic Jacobi eigendecomposition, Cholesky
//! factorization with solves, and Gauss-Legendre nodes.
//!
//! Everything here targets desk-scale matrices (p up to a few dozen), where
//! Jacobi reaches machine precision in a handful of sweeps.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub(crate) fn frobenius(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn max_abs_entry(m: &ArrayView2<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn max_asymmetry(m: &ArrayView2<f64>) -> f64 {
    let p = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

pub(crate) fn symmetrize(m: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    let p = out.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = avg;
            out[[j, i]] = avg;
        }
    }
    out
}

fn off_diagonal_norm(m: &Array2<f64>) -> f64 {
    let p = m.nrows();
    let mut sum = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            sum += 2.0 * m[[i, j]] * m[[i, j]];
        }
    }
    sum.sqrt()
}

/// Eigenvalues (descending) and orthonormal eigenvectors (as columns) of a
/// symmetric matrix via cyclic Jacobi sweeps. The caller checks symmetry.
pub(crate) fn jacobi_eigh(a: &ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let p = a.nrows();
    let mut m = a.to_owned();
    let mut v: Array2<f64> = Array2::eye(p);
    if p > 1 {
        let scale = frobenius(a).max(f64::MIN_POSITIVE);
        let tol = 1e-15 * scale;
        for _sweep in 0..100 {
            if off_diagonal_norm(&m) <= tol {
                break;
            }
            for i in 0..p - 1 {
                for j in (i + 1)..p {
                    let apq = m[[i, j]];
                    if apq.abs() <= tol * 1e-2 {
                        continue;
                    }
                    let theta = (m[[j, j]] - m[[i, i]]) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..p {
                        let mik = m[[i, k]];
                        let mjk = m[[j, k]];
                        m[[i, k]] = c * mik - s * mjk;
                        m[[j, k]] = s * mik + c * mjk;
                    }
                    for k in 0..p {
                        let mki = m[[k, i]];
                        let mkj = m[[k, j]];
                        m[[k, i]] = c * mki - s * mkj;
                        m[[k, j]] = s * mki + c * mkj;
                    }
                    m[[i, j]] = 0.0;
                    m[[j, i]] = 0.0;
                    for k in 0..p {
                        let vki = v[[k, i]];
                        let vkj = v[[k, j]];
                        v[[k, i]] = c * vki - s * vkj;
                        v[[k, j]] = s * vki + c * vkj;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a_i, &b_i| m[[b_i, b_i]].partial_cmp(&m[[a_i, a_i]]).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| m[[k, k]]).collect();
    let mut vectors = Array2::zeros((p, p));
    for (dst, &src) in order.iter().enumerate() {
        // sign convention: first component above noise level is positive
        let col = v.column(src);
        let flip = match col.iter().find(|e| e.abs() > 1e-12) {
            Some(e) if *e < 0.0 => -1.0,
            _ => 1.0,
        };
        for r in 0..p {
            vectors[[r, dst]] = flip * col[r];
        }
    }
    (values, vectors)
}

/// Lower-triangular L with L L^T = A, or None when A is not positive definite.
pub(crate) fn cholesky(a: &ArrayView2<f64>) -> Option<Array2<f64>> {
    let p = a.nrows();
    let mut l: Array2<f64> = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves L y = b for lower-triangular L.
pub(crate) fn forward_substitute(l: &Array2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let p = l.nrows();
    let mut y = Array1::zeros(p);
    for i in 0..p {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    y
}

/// Solves L L^T x = b.
pub(crate) fn solve_with_cholesky(l: &Array2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let p = l.nrows();
    let y = forward_substitute(l, b);
    let mut x = Array1::zeros(p);
    for ii in 0..p {
        let i = p - 1 - ii;
        let mut sum = y[i];
        for k in (i + 1)..p {
            sum -= l[[k, i]] * x[k];
        }
        x[i] = sum / l[[i, i]];
    }
    x
}

/// x^T (L L^T)^{-1} x = ||L^{-1} x||^2.
pub(crate) fn quad_form_from_cholesky(l: &Array2<f64>, x: &ArrayView1<f64>) -> f64 {
    let y = forward_substitute(l, x);
    y.iter().map(|v| v * v).sum()
}

/// Inverse of L L^T via columnwise solves; symmetrized on the way out.
pub(crate) fn inverse_from_cholesky(l: &Array2<f64>) -> Array2<f64> {
    let p = l.nrows();
    let mut inv = Array2::zeros((p, p));
    let mut e = Array1::zeros(p);
    for j in 0..p {
        e[j] = 1.0;
        let col = solve_with_cholesky(l, &e.view());
        for i in 0..p {
            inv[[i, j]] = col[i];
        }
        e[j] = 0.0;
    }
    symmetrize(&inv.view())
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on [0, 1], ordered by ascending node.
pub(crate) fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature needs at least one node");
    if n == 1 {
        return vec![(0.5, 1.0)];
    }
    let mut points = vec![(0.0, 0.0); n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre_and_derivative(n, z);
            let dz = pn / dpn;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dpn) = legendre_and_derivative(n, z);
        let w = 2.0 / ((1.0 - z * z) * dpn * dpn);
        points[i] = (0.5 * (1.0 - z), 0.5 * w);
        points[n - 1 - i] = (0.5 * (1.0 + z), 0.5 * w);
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_two_by_two_hand_solve() {
        // [[2,1],[1,2]] has eigenpairs (3, (1,1)/sqrt2) and (1, (1,-1)/sqrt2)
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = jacobi_eigh(&a.view());
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let s = 0.5_f64.sqrt();
        assert!((vecs[[0, 0]] - s).abs() < 1e-12);
        assert!((vecs[[1, 0]] - s).abs() < 1e-12);
        assert!((vecs[[0, 1]] - s).abs() < 1e-12);
        assert!((vecs[[1, 1]] + s).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3 and -1
        assert!(cholesky(&a.view()).is_none());
    }

    #[test]
    fn cholesky_solve_round_trip() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let l = cholesky(&a.view()).unwrap();
        let b = array![1.0, -2.0, 0.5];
        let x = solve_with_cholesky(&l, &b.view());
        let back = a.dot(&x);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let q = quad_form_from_cholesky(&l, &b.view());
        let direct = b.dot(&x);
        assert!((q - direct).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // k nodes are exact for degree 2k-1
        for nodes in [1usize, 2, 4, 8, 16, 64] {
            let pts = gauss_legendre_01(nodes);
            let wsum: f64 = pts.iter().map(|(_, w)| w).sum();
            assert!((wsum - 1.0).abs() < 1e-13, "weights at {nodes} nodes");
            let deg = 2 * nodes - 1;
            let quad: f64 = pts.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!(
                (quad - exact).abs() < 1e-12,
                "degree {deg} at {nodes} nodes: {quad} vs {exact}"
            );
        }
    }
}
