//! Shared oracles for the integration suites. Everything here is
//! implemented independently of the library's linear-algebra paths so it can
//! serve as a reference.
#![allow(dead_code)] // each test binary uses its own subset

use nalgebra::DMatrix;
use rand::Rng;

/// One-sided Jacobi SVD: returns the singular values in descending order.
/// Rotates column pairs until all are mutually orthogonal; independent of
/// any Householder or bidiagonalization machinery.
pub fn jacobi_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let work = if a.nrows() >= a.ncols() {
        a.clone()
    } else {
        a.transpose()
    };
    let (n, m) = work.shape();
    let mut cols: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| work[(i, j)]).collect())
        .collect();
    let tol = 1e-14;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    app += cols[p][i] * cols[p][i];
                    aqq += cols[q][i] * cols[q][i];
                    apq += cols[p][i] * cols[q][i];
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let vp = cols[p][i];
                    let vq = cols[q][i];
                    cols[p][i] = c * vp - s * vq;
                    cols[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sigma.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sigma
}

/// Gaussian-elimination determinant with partial pivoting on plain vectors.
pub fn det_gauss(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)]).collect())
        .collect();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            a.swap(k, piv);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    det
}

/// Check the pivoted-QR diagonal dominance pattern:
/// `r_ii^2 >= sum_{j=i..k} r_jk^2` for every diagonal `i` and later column
/// `k`, within `slack`.
pub fn dominance_holds(r_mat: &DMatrix<f64>, slack: f64) -> bool {
    let (m, n) = r_mat.shape();
    let limit = m.min(n);
    for i in 0..limit {
        let lhs = r_mat[(i, i)] * r_mat[(i, i)];
        for k in i..limit {
            let mut sum = 0.0;
            for j in i..=k {
                sum += r_mat[(j, k)] * r_mat[(j, k)];
            }
            if lhs + slack < sum {
                return false;
            }
        }
    }
    true
}

pub fn random_matrix(n: usize, m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0))
}
