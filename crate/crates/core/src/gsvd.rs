//! Generalized SVD of a square pair `(a, b)` where `a` is diagonal with a
//! strictly positive diagonal.
//!
//! Both operands are factored over a shared right factor:
//!
//! ```text
//! a = m1 * d1 * q^T        d1 = diag(I, C)
//! b = m2 * d2 * q^T        d2 = [0 G; 0 0]
//! ```
//!
//! with `m1`, `m2` orthogonal, `q` invertible, and `C`, `G` positive diagonal
//! blocks of size `l = rank(b)`. The generalized singular values are the
//! ratios `d1_i / d2_i`: the first `r0 - l` are infinite, the remaining `l`
//! equal `c_i / g_i`.
//!
//! Because `a` is invertible the pair reduces to an ordinary SVD of
//! `t = b * a^{-1}`: with `t = p * diag(tau) * r^T`, the columns of `r` that
//! span the null space of `t` become the leading (infinite) columns of `m1`,
//! the remaining columns pair up with `p` in reverse order so the finite
//! generalized singular values come out sorted descending, and
//! `q = a * m1 * d1^{-1}` closes both identities exactly.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::svd::jacobi_svd;

#[derive(Debug, Clone)]
pub struct GsvdResult {
    /// Orthogonal left factor of the first operand.
    pub m1: DenseMatrix,
    /// Orthogonal left factor of the second operand.
    pub m2: DenseMatrix,
    /// Shared (invertible, generally non-orthogonal) right factor.
    pub q: DenseMatrix,
    pub d1: DenseMatrix,
    pub d2: DenseMatrix,
    /// Diagonal of the C block (length `l`).
    pub c: Vec<f64>,
    /// Diagonal of the G block (length `l`), strictly positive.
    pub g: Vec<f64>,
    /// Rank of the second operand.
    pub l: usize,
}

impl GsvdResult {
    pub fn order(&self) -> usize {
        self.d1.rows()
    }

    /// Generalized singular values squared, aligned with the columns of `q`:
    /// `r0 - l` leading infinities followed by `(c_i / g_i)^2`.
    pub fn lambda(&self) -> Vec<f64> {
        let r0 = self.order();
        let mut out = vec![f64::INFINITY; r0 - self.l];
        out.extend(self.c.iter().zip(&self.g).map(|(&c, &g)| (c / g) * (c / g)));
        out
    }

    /// `(q^T)^{-1}`, available in closed form as `a^{-1} * m1 * d1`.
    pub fn q_t_inv(&self, a_diag: &[f64]) -> DenseMatrix {
        let r0 = self.order();
        assert_eq!(a_diag.len(), r0);
        DenseMatrix::from_fn(r0, r0, |i, j| self.m1[(i, j)] * self.d1[(j, j)] / a_diag[i])
    }
}

/// Numerical rank threshold: singular values above
/// `100 * r0 * eps * sigma_max` count toward the rank.
fn numerical_rank(svals: &[f64], r0: usize) -> usize {
    let smax = svals.first().copied().unwrap_or(0.0);
    let thresh = 100.0 * r0 as f64 * f64::EPSILON * smax;
    svals.iter().take_while(|&&s| s > thresh).count()
}

pub fn gsvd_pair(a: &DenseMatrix, b: &DenseMatrix) -> Result<GsvdResult> {
    let r0 = a.rows();
    if a.cols() != r0 || b.shape() != (r0, r0) {
        return Err(Error::ShapeMismatch(format!(
            "gsvd operands must be square and equal-sized, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut sigma = Vec::with_capacity(r0);
    for i in 0..r0 {
        for j in 0..r0 {
            if i != j && a[(i, j)] != 0.0 {
                return Err(Error::NotDiagonalPositive);
            }
        }
        if a[(i, i)] <= 0.0 {
            return Err(Error::NotDiagonalPositive);
        }
        sigma.push(a[(i, i)]);
    }

    let l = numerical_rank(&jacobi_svd(b, None).sigma, r0);

    // t = b * a^{-1}: column j of b scaled by 1 / sigma_j.
    let mut t = b.clone();
    for (j, &s) in sigma.iter().enumerate() {
        t.scale_col(j, 1.0 / s);
    }
    let tsvd = jacobi_svd(&t, Some(l));

    let mut m1 = DenseMatrix::zeros(r0, r0);
    let mut m2 = DenseMatrix::zeros(r0, r0);
    let mut d1 = DenseMatrix::zeros(r0, r0);
    let mut d2 = DenseMatrix::zeros(r0, r0);
    let mut c = vec![0.0; l];
    let mut g = vec![0.0; l];

    // Null-space part: infinite generalized singular values first.
    for j in 0..(r0 - l) {
        m1.set_col(j, &tsvd.v.col_to_vec(l + j));
        m2.set_col(l + j, &tsvd.u.col_to_vec(l + j));
        d1[(j, j)] = 1.0;
    }
    // Finite part, reversed so the largest ratio c/g lands first.
    for i in 0..l {
        let src = l - 1 - i;
        let tau = tsvd.sigma[src];
        let scale = (1.0 + tau * tau).sqrt();
        c[i] = 1.0 / scale;
        g[i] = tau / scale;
        let col = r0 - l + i;
        m1.set_col(col, &tsvd.v.col_to_vec(src));
        m2.set_col(i, &tsvd.u.col_to_vec(src));
        d1[(col, col)] = c[i];
        d2[(i, col)] = g[i];
    }

    // q = a * m1 * d1^{-1}; d1 is diagonal and positive by construction.
    let q = DenseMatrix::from_fn(r0, r0, |i, j| sigma[i] * m1[(i, j)] / d1[(j, j)]);

    Ok(GsvdResult {
        m1,
        m2,
        q,
        d1,
        d2,
        c,
        g,
        l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruction_errors(a: &DenseMatrix, b: &DenseMatrix, r: &GsvdResult) -> (f64, f64) {
        let a_rec = r.m1.mul(&r.d1).mul_tr(&r.q);
        let b_rec = r.m2.mul(&r.d2).mul_tr(&r.q);
        let ea = a.sub(&a_rec).fro_norm() / a.fro_norm().max(1e-300);
        let eb = if b.fro_norm() == 0.0 {
            b_rec.fro_norm()
        } else {
            b.sub(&b_rec).fro_norm() / b.fro_norm()
        };
        (ea, eb)
    }

    #[test]
    fn identical_operands_give_unit_values() {
        let a = DenseMatrix::from_diag(&[2.0, 1.0]);
        let r = gsvd_pair(&a, &a).unwrap();
        assert_eq!(r.l, 2);
        for (c, g) in r.c.iter().zip(&r.g) {
            assert!((c / g - 1.0).abs() < 1e-12);
        }
        let (ea, eb) = reconstruction_errors(&a, &a, &r);
        assert!(ea < 1e-12 && eb < 1e-12, "errors {ea} {eb}");
    }

    #[test]
    fn zero_second_operand() {
        let a = DenseMatrix::from_diag(&[1.0, 1.0]);
        let b = DenseMatrix::zeros(2, 2);
        let r = gsvd_pair(&a, &b).unwrap();
        assert_eq!(r.l, 0);
        assert_eq!(r.lambda(), vec![f64::INFINITY, f64::INFINITY]);
        assert_eq!(r.d1, DenseMatrix::identity(2));
        assert!(r.d2.is_zero());
        let (ea, eb) = reconstruction_errors(&a, &b, &r);
        assert!(ea < 1e-12 && eb < 1e-12);
    }

    #[test]
    fn full_rank_dense_pair_reconstructs() {
        let a = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let b = DenseMatrix::from_vec(3, 3, vec![0.8, -0.3, 0.5, 0.2, 1.1, -0.7, -0.4, 0.6, 0.9])
            .unwrap();
        let r = gsvd_pair(&a, &b).unwrap();
        assert_eq!(r.l, 3);
        let (ea, eb) = reconstruction_errors(&a, &b, &r);
        assert!(ea < 1e-10 && eb < 1e-10, "errors {ea} {eb}");
        // Finite lambdas sorted descending.
        let lam = r.lambda();
        for w in lam.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn rejects_non_diagonal_first_operand() {
        let mut a = DenseMatrix::from_diag(&[1.0, 2.0]);
        a[(0, 1)] = 0.5;
        let b = DenseMatrix::identity(2);
        assert!(matches!(gsvd_pair(&a, &b), Err(Error::NotDiagonalPositive)));
        let a = DenseMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(gsvd_pair(&a, &b), Err(Error::NotDiagonalPositive)));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let a = DenseMatrix::from_diag(&[1.0, 2.0]);
        let b = DenseMatrix::identity(3);
        assert!(matches!(gsvd_pair(&a, &b), Err(Error::ShapeMismatch(_))));
    }
}
