//! Small dense symmetric eigenproblems (cyclic Jacobi) and the Moore–Penrose
//! pseudo-inverse built from them. Matrices are row-major `dim x dim` slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs, sqrt};

/// Eigenvalues and eigenvectors of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub dim: usize,
    pub values: Vec<f64>,
    /// Column `k` (entries `vectors[i * dim + k]`) is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

const MAX_SWEEPS: usize = 100;

pub fn symmetric_eigen(matrix: &[f64], dim: usize) -> SymmetricEigen {
    assert_eq!(matrix.len(), dim * dim);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..dim {
            for q in p + 1..dim {
                off += a[p * dim + q] * a[p * dim + q];
            }
        }
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = a[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * dim + q] - a[p * dim + p]) / (2.0 * apq);
                let t = theta.signum() / (abs(theta) + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                rotate(&mut a, &mut v, dim, p, q, c, s);
            }
        }
    }
    SymmetricEigen {
        dim,
        values: (0..dim).map(|i| a[i * dim + i]).collect(),
        vectors: v,
    }
}

/// Applies the Jacobi rotation `J(p, q, c, s)`: `a <- Jᵀ a J`, `v <- v J`.
fn rotate(a: &mut [f64], v: &mut [f64], dim: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..dim {
        let akp = a[k * dim + p];
        let akq = a[k * dim + q];
        a[k * dim + p] = c * akp - s * akq;
        a[k * dim + q] = s * akp + c * akq;
    }
    for k in 0..dim {
        let apk = a[p * dim + k];
        let aqk = a[q * dim + k];
        a[p * dim + k] = c * apk - s * aqk;
        a[q * dim + k] = s * apk + c * aqk;
    }
    a[p * dim + q] = 0.0;
    a[q * dim + p] = 0.0;
    for k in 0..dim {
        let vkp = v[k * dim + p];
        let vkq = v[k * dim + q];
        v[k * dim + p] = c * vkp - s * vkq;
        v[k * dim + q] = s * vkp + c * vkq;
    }
}

/// Pseudo-inverse of a symmetric positive-semidefinite matrix; eigenvalues
/// below `rank_tol * max eigenvalue` count as zero. Returns `(pinv, rank)`.
pub fn pseudo_inverse_psd(matrix: &[f64], dim: usize, rank_tol: f64) -> (Vec<f64>, usize) {
    let eig = symmetric_eigen(matrix, dim);
    let top = eig.values.iter().copied().fold(0.0, f64::max);
    let cutoff = rank_tol * top;
    let mut pinv = vec![0.0; dim * dim];
    let mut rank = 0;
    for k in 0..dim {
        let lambda = eig.values[k];
        if !(lambda > cutoff) || lambda <= 0.0 {
            continue;
        }
        rank += 1;
        for i in 0..dim {
            let vi = eig.vectors[i * dim + k] / lambda;
            if vi == 0.0 {
                continue;
            }
            for j in 0..dim {
                pinv[i * dim + j] += vi * eig.vectors[j * dim + k];
            }
        }
    }
    (pinv, rank)
}

/// `matrix * x` for a square row-major matrix.
pub fn mat_vec(matrix: &[f64], dim: usize, x: &[f64]) -> Vec<f64> {
    (0..dim)
        .map(|i| matrix[i * dim..(i + 1) * dim].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}
