//! Truncated singular value decomposition via one-sided Jacobi rotations.
//!
//! The factorization is computed on the smaller dimension of the input: the
//! working copy's columns are rotated until they are pairwise orthogonal, at
//! which point the column norms are the singular values and the accumulated
//! rotations form the right singular vectors. Deterministic and dependency
//! free; intended for matrices up to a couple of thousand on a side.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm_sq, DenseMatrix};

/// Rank-r factors of a matrix: `x ≈ u * diag(sigma) * v^T` with orthonormal
/// columns in `u` and `v` and `sigma` sorted non-increasing.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `u * diag(sigma) * v^T`
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            us.scale_col(j, s);
        }
        us.mul_tr(&self.v)
    }
}

/// Top-r singular triplets of `x`.
///
/// The sign of each singular vector pair is fixed so that the entry of
/// largest magnitude in each column of `u` is positive, which makes the
/// output reproducible across runs and platforms.
pub fn truncated_svd(x: &DenseMatrix, r: usize) -> Result<TruncatedSvd> {
    let (m, n) = x.shape();
    if r < 1 || r > m.min(n) {
        return Err(Error::RankOutOfRange {
            rank: r,
            rows: m,
            cols: n,
        });
    }
    let full = jacobi_svd(x, None);
    let u = DenseMatrix::from_fn(m, r, |i, j| full.u[(i, j)]);
    let v = DenseMatrix::from_fn(n, r, |i, j| full.v[(i, j)]);
    Ok(TruncatedSvd {
        u,
        sigma: full.sigma[..r].to_vec(),
        v,
    })
}

/// All min(m, n) singular triplets, sorted non-increasing.
#[derive(Debug, Clone)]
pub(crate) struct FullSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;

/// One-sided Jacobi SVD.
///
/// `normalize_count`, when given, fixes how many leading columns of `u` are
/// taken from the rotated data; the rest are filled with an orthonormal
/// completion. When absent the split is decided by a numerical-rank cutoff
/// on the singular values. Callers that know the rank of the input (the
/// generalized SVD does) pass it explicitly so the split cannot disagree.
pub(crate) fn jacobi_svd(x: &DenseMatrix, normalize_count: Option<usize>) -> FullSvd {
    let (m, n) = x.shape();
    if m >= n {
        jacobi_svd_tall(x, normalize_count)
    } else {
        let flipped = jacobi_svd_tall(&x.transpose(), normalize_count);
        FullSvd {
            u: flipped.v,
            sigma: flipped.sigma,
            v: flipped.u,
        }
    }
}

fn jacobi_svd_tall(x: &DenseMatrix, normalize_count: Option<usize>) -> FullSvd {
    let (m, n) = x.shape();
    debug_assert!(m >= n);
    // Column-major working copy: rotations touch whole columns.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| x.col_to_vec(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ci, cj) = pair_mut(&mut a, i, j);
                let aii = norm_sq(ci);
                let ajj = norm_sq(cj);
                let aij = dot(ci, cj);
                if aij.abs() <= JACOBI_TOL * (aii * ajj).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotation zeroing the (i, j) entry of the implicit Gram.
                let zeta = (ajj - aii) / (2.0 * aij);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(ci, cj, c, s);
                let (vi, vj) = pair_mut(&mut v, i, j);
                rotate(vi, vj, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    // Sort by singular value, descending, stable in the original index.
    let mut sigma: Vec<f64> = a.iter().map(|col| norm_sq(col).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| sigma[q].partial_cmp(&sigma[p]).unwrap().then(p.cmp(&q)));
    let a: Vec<Vec<f64>> = order.iter().map(|&p| a[p].clone()).collect();
    let v: Vec<Vec<f64>> = order.iter().map(|&p| v[p].clone()).collect();
    sigma = order.iter().map(|&p| sigma[p]).collect();

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let cutoff = sigma_max * f64::EPSILON * (m.max(n) as f64) * 10.0;
    let keep = normalize_count
        .unwrap_or_else(|| sigma.iter().take_while(|&&s| s > cutoff).count())
        .min(n);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (j, col) in a.iter().enumerate().take(keep) {
        // Never divide by an exactly dead column; completion takes over.
        if sigma[j] > 0.0 {
            u_cols.push(col.iter().map(|e| e / sigma[j]).collect());
        } else {
            break;
        }
    }
    complete_orthonormal(&mut u_cols, m, n);

    let mut u = DenseMatrix::zeros(m, n);
    for (j, col) in u_cols.iter().enumerate() {
        u.set_col(j, col);
    }
    let mut v_mat = DenseMatrix::zeros(n, n);
    for (j, col) in v.iter().enumerate() {
        v_mat.set_col(j, col);
    }

    // Sign convention: largest-magnitude entry of each u column positive;
    // paired v column flips with it so the product is unchanged.
    for j in 0..n {
        let col = u.col_to_vec(j);
        let mut best = 0usize;
        for (i, e) in col.iter().enumerate() {
            if e.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.scale_col(j, -1.0);
            v_mat.scale_col(j, -1.0);
        }
    }

    FullSvd { u, sigma, v: v_mat }
}

fn pair_mut<T>(cols: &mut [Vec<T>], i: usize, j: usize) -> (&mut Vec<T>, &mut Vec<T>) {
    debug_assert!(i < j);
    let (lo, hi) = cols.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

fn rotate(ci: &mut [f64], cj: &mut [f64], c: f64, s: f64) {
    for (xi, xj) in ci.iter_mut().zip(cj.iter_mut()) {
        let a = *xi;
        let b = *xj;
        *xi = c * a - s * b;
        *xj = s * a + c * b;
    }
}

/// Extends `cols` (orthonormal vectors in R^m) to `want` vectors by
/// orthogonalizing canonical basis vectors against the current set.
fn complete_orthonormal(cols: &mut Vec<Vec<f64>>, m: usize, want: usize) {
    let mut e = 0usize;
    while cols.len() < want {
        assert!(e < m, "orthonormal completion exhausted the basis");
        let mut cand = vec![0.0; m];
        cand[e] = 1.0;
        e += 1;
        // Two rounds of projection keep the result orthogonal to working
        // precision.
        for _ in 0..2 {
            for col in cols.iter() {
                let p = dot(&cand, col);
                for (c, &q) in cand.iter_mut().zip(col) {
                    *c -= p * q;
                }
            }
        }
        let nrm = norm_sq(&cand).sqrt();
        if nrm > 1e-8 {
            for c in cand.iter_mut() {
                *c /= nrm;
            }
            cols.push(cand);
        }
    }
}
