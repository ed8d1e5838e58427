//! Proposing new components for an under-complete NMF.
//!
//! The factorization `w0 h0` is compared against the truncated SVD of the
//! data through the generalized SVD of `(Sigma, U^T w0 h0 V)`. Directions
//! whose generalized singular value is large (or infinite) are poorly
//! represented by the NMF; the best k of them become candidate rows for `h`,
//! companion columns and amplitude rescalings are fitted by a convex solve,
//! both are truncated to nonnegativity, and a joint amplitude re-fit closes
//! the step.

use crate::error::{Error, Result};
use crate::gsvd::gsvd_pair;
use crate::matrix::{dot, norm_sq, DenseMatrix};
use crate::nmf::NmfFactors;
use crate::nnls::nnls;
use crate::svd::TruncatedSvd;
use crate::truncation::dominant_sign_pair;

/// Generalized singular values squared, aligned with the columns of the
/// direction matrix `V (Q^T)^{-1}`. Infinite entries mark directions missing
/// entirely from the factorization's range.
#[derive(Debug, Clone)]
pub struct LambdaSpectrum {
    pub values: Vec<f64>,
    /// Permutation sorting `values` descending, infinite first, ties by
    /// lower original index.
    pub order: Vec<usize>,
}

impl LambdaSpectrum {
    pub fn infinite_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_infinite()).count()
    }

    pub fn finite_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .collect()
    }
}

/// Computes the spectrum and the full direction matrix (one column per
/// spectrum entry).
///
/// Requires rank at least 2: a rank-1 factorization already matches the
/// leading SVD component, so there is no direction to propose. The SVD may
/// carry more components than the factorization, in which case the surplus
/// directions are guaranteed to come out infinite.
pub fn lambda_spectrum(
    svd: &TruncatedSvd,
    f: &NmfFactors,
) -> Result<(LambdaSpectrum, DenseMatrix)> {
    let rs = svd.rank();
    if rs < 2 {
        return Err(Error::RankTooSmall);
    }
    if svd.u.rows() != f.w.rows() || svd.v.rows() != f.h.cols() {
        return Err(Error::ShapeMismatch(format!(
            "lambda_spectrum: svd is for a {}x{} matrix, factors for {}x{}",
            svd.u.rows(),
            svd.v.rows(),
            f.w.rows(),
            f.h.cols()
        )));
    }

    // a = U^T (w0 h0) V, assembled without forming the m x n product.
    let a = svd.u.tr_mul(&f.w).mul(&f.h.mul(&svd.v));
    let sigma_mat = DenseMatrix::from_diag(&svd.sigma);
    let g = gsvd_pair(&sigma_mat, &a)?;

    let values = g.lambda();
    let directions = svd.v.mul(&g.q_t_inv(&svd.sigma));

    let mut order: Vec<usize> = (0..rs).collect();
    order.sort_by(|&p, &q| values[q].partial_cmp(&values[p]).unwrap().then(p.cmp(&q)));

    Ok((LambdaSpectrum { values, order }, directions))
}

/// Picks the k directions with the largest spectrum values (infinite first,
/// ties by lower index) and returns them as unit-norm rows.
pub fn select_directions(
    spectrum: &LambdaSpectrum,
    directions: &DenseMatrix,
    k: usize,
) -> Result<DenseMatrix> {
    let rs = spectrum.values.len();
    if k < 1 || k > rs {
        return Err(Error::KOutOfRange { k, max: rs });
    }
    if directions.cols() != rs {
        return Err(Error::ShapeMismatch(
            "select_directions: spectrum and direction matrix disagree".into(),
        ));
    }
    let n = directions.rows();
    let mut y = DenseMatrix::zeros(k, n);
    for (row, &col) in spectrum.order.iter().take(k).enumerate() {
        let mut d = directions.col_to_vec(col);
        let nrm = norm_sq(&d).sqrt();
        if nrm > 0.0 {
            d.iter_mut().for_each(|v| *v /= nrm);
        }
        y.row_mut(row).copy_from_slice(&d);
    }
    Ok(y)
}

/// The quadratic form behind the companion-column solve, kept in structured
/// form: the full block matrices factor through small Gram matrices, so the
/// mk x mk system is never materialized.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    /// `(w0^T w0) o (h0 h0^T)`, elementwise product.
    pub theta: DenseMatrix,
    /// `xi_p = w0_p^T x h0_p`.
    pub xi: Vec<f64>,
    /// `sum_ij x_ij^2`.
    pub phi: f64,
    /// `x y_p^T` stacked as the columns of an m x k matrix.
    pub gamma: DenseMatrix,
    /// `w0^T w0`.
    pub w_gram: DenseMatrix,
    /// `h0 y^T` (r0 x k); together with `w0` it generates the block matrix P.
    pub h_cross: DenseMatrix,
    /// `y y^T` (k x k); its Kronecker product with I_m is the block matrix Psi.
    pub y_gram: DenseMatrix,
    /// Inverse of `y_gram`.
    pub y_gram_inv: DenseMatrix,
    /// Quadratic matrix of the reduced problem, `theta - P Psi^{-1} P^T`.
    pub reduced_quadratic: DenseMatrix,
    /// Linear coefficient of the reduced problem, `xi - P Psi^{-1} gamma`.
    pub reduced_linear: Vec<f64>,
    /// Constant of the reduced problem, `phi - gamma^T Psi^{-1} gamma`.
    pub reduced_constant: f64,
}

impl QuadraticForm {
    /// Value of the reduced objective at `alpha`:
    /// `alpha^T Q alpha - 2 c^T alpha + const`.
    pub fn eval_reduced(&self, alpha: &[f64]) -> f64 {
        let qa = self.reduced_quadratic.mul_vec(alpha);
        dot(alpha, &qa) - 2.0 * dot(&self.reduced_linear, alpha) + self.reduced_constant
    }

    /// Stationary companion columns for a given `alpha`, reshaped to m x k:
    /// `S(alpha) = (x - w0 diag(alpha) h0) y^T (y y^T)^{-1}`.
    pub fn companion_columns(
        &self,
        x: &DenseMatrix,
        f: &NmfFactors,
        y: &DenseMatrix,
        alpha: &[f64],
    ) -> DenseMatrix {
        if y.rows() == 0 {
            return DenseMatrix::zeros(x.rows(), 0);
        }
        let mut w_scaled = f.w.clone();
        for (j, &a) in alpha.iter().enumerate() {
            w_scaled.scale_col(j, a);
        }
        let residual = x.sub(&w_scaled.mul(&f.h));
        residual.mul_tr(y).mul(&self.y_gram_inv)
    }
}

/// Selected directions with their fitted companion columns and amplitudes.
#[derive(Debug, Clone)]
pub struct RecoveryCandidate {
    /// The k selected direction rows (k x n, unit norm).
    pub y: DenseMatrix,
    /// Companion columns for `w` (m x k); not necessarily nonnegative.
    pub s: DenseMatrix,
    /// Nonnegative rescaling of the existing components.
    pub alpha: Vec<f64>,
    pub quadratic: QuadraticForm,
}

/// Fits the companion columns and amplitude rescaling.
///
/// `alpha` minimizes the reduced convex objective subject to `alpha >= 0`;
/// the companion columns are the exact stationary point of the full
/// objective at that `alpha`. The solve runs as a nonnegative least-squares
/// problem over the projection onto the orthocomplement of the selected
/// directions, which is the same quadratic with better conditioning.
pub fn solve_s_alpha(
    x: &DenseMatrix,
    f: &NmfFactors,
    y: &DenseMatrix,
) -> Result<RecoveryCandidate> {
    let (m, n) = x.shape();
    if f.w.rows() != m || f.h.cols() != n || y.cols() != n {
        return Err(Error::ShapeMismatch(
            "solve_s_alpha: nonconforming shapes".into(),
        ));
    }
    let r0 = f.rank();
    let k = y.rows();

    let y_gram = y.mul_tr(y);
    let y_gram_inv = spd_inverse(&y_gram).ok_or(Error::CollinearDirections)?;

    let w_gram = f.w.tr_mul(&f.w);
    let h_gram = f.h.mul_tr(&f.h);
    let theta = DenseMatrix::from_fn(r0, r0, |i, j| w_gram[(i, j)] * h_gram[(i, j)]);

    let wtx = f.w.tr_mul(x); // r0 x n
    let xi: Vec<f64> = (0..r0).map(|p| dot(wtx.row(p), f.h.row(p))).collect();
    let phi = x.fro_norm_sq();
    let gamma = x.mul_tr(y); // m x k
    let h_cross = f.h.mul_tr(y); // r0 x k

    // Reduced pieces through the small Gram factors.
    let hc_gi = h_cross.mul(&y_gram_inv); // r0 x k
    let ngn = hc_gi.mul_tr(&h_cross); // r0 x r0
    let reduced_quadratic =
        DenseMatrix::from_fn(r0, r0, |i, j| theta[(i, j)] - w_gram[(i, j)] * ngn[(i, j)]);
    let gamma_gi = gamma.mul(&y_gram_inv); // m x k
    let wt_gg = f.w.tr_mul(&gamma_gi); // r0 x k
    let reduced_linear: Vec<f64> = (0..r0)
        .map(|p| xi[p] - dot(h_cross.row(p), wt_gg.row(p)))
        .collect();
    let mut gg = 0.0;
    for (a, b) in gamma.entries().iter().zip(gamma_gi.entries()) {
        gg += a * b;
    }
    let reduced_constant = phi - gg;

    // Projected data and rows: x_perp = x (I - y^T G^{-1} y), likewise h0.
    let (x_perp, h_perp) = if k == 0 {
        (x.clone(), f.h.clone())
    } else {
        (x.sub(&gamma_gi.mul(y)), f.h.sub(&hc_gi.mul(y)))
    };

    // Nonnegative least squares over vec(w_p h_perp_p) columns.
    let mut design = DenseMatrix::zeros(m * n, r0);
    for p in 0..r0 {
        for i in 0..m {
            let wv = f.w[(i, p)];
            let base = i * n;
            for (jj, &hv) in h_perp.row(p).iter().enumerate() {
                design[(base + jj, p)] = wv * hv;
            }
        }
    }
    let alpha = nnls(&design, x_perp.entries())?;

    let quadratic = QuadraticForm {
        theta,
        xi,
        phi,
        gamma,
        w_gram,
        h_cross,
        y_gram,
        y_gram_inv,
        reduced_quadratic,
        reduced_linear,
        reduced_constant,
    };
    let s = quadratic.companion_columns(x, f, y, &alpha);

    Ok(RecoveryCandidate {
        y: y.clone(),
        s,
        alpha,
        quadratic,
    })
}

/// Truncates each (column, row) pair to its dominant sign pair. Returns the
/// nonnegative factors plus the indices of pairs that truncated to zero.
pub fn truncate_pairs(s: &DenseMatrix, y: &DenseMatrix) -> (DenseMatrix, DenseMatrix, Vec<usize>) {
    assert_eq!(s.cols(), y.rows(), "truncate_pairs: pair count mismatch");
    let (m, k) = s.shape();
    let n = y.cols();
    let mut w_new = DenseMatrix::zeros(m, k);
    let mut h_new = DenseMatrix::zeros(k, n);
    let mut zeroed = Vec::new();
    for j in 0..k {
        let (wj, hj) = dominant_sign_pair(&s.col_to_vec(j), y.row(j));
        if wj.iter().all(|&v| v == 0.0) {
            zeroed.push(j);
        }
        w_new.set_col(j, &wj);
        h_new.row_mut(j).copy_from_slice(&hj);
    }
    (w_new, h_new, zeroed)
}

/// Joint amplitude re-fit: the nonnegative `beta` minimizing
/// `||x - sum_p beta_p w_p h_p||^2`, solved as NNLS with design columns
/// `vec(w_p h_p)`.
pub fn rescale_beta(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<Vec<f64>> {
    let (m, n) = x.shape();
    let r = w.cols();
    if w.rows() != m || h.cols() != n || h.rows() != r {
        return Err(Error::ShapeMismatch("rescale_beta: nonconforming".into()));
    }
    if !w.is_nonnegative() || !h.is_nonnegative() {
        return Err(Error::NegativeEntry {
            row: 0,
            col: 0,
            value: w.min_entry().min(h.min_entry()),
        });
    }
    let mut design = DenseMatrix::zeros(m * n, r);
    for p in 0..r {
        for i in 0..m {
            let wv = w[(i, p)];
            let base = i * n;
            for (jj, &hv) in h.row(p).iter().enumerate() {
                design[(base + jj, p)] = wv * hv;
            }
        }
    }
    nnls(&design, x.entries())
}

/// Augmented factors with the re-fit amplitudes already folded into `w_g`.
#[derive(Debug, Clone)]
pub struct AugmentedFactors {
    pub w_g: DenseMatrix,
    pub h_g: DenseMatrix,
    pub beta: Vec<f64>,
    /// Indices (within the proposed block) of components whose truncation
    /// came out all-zero and were dropped.
    pub dropped: Vec<usize>,
}

impl AugmentedFactors {
    pub fn rank(&self) -> usize {
        self.w_g.cols()
    }

    pub fn into_factors(self) -> Result<NmfFactors> {
        NmfFactors::new(self.w_g, self.h_g)
    }
}

/// The full recovery step: spectrum, direction selection, companion solve,
/// truncation, assembly, and the joint amplitude re-fit.
pub fn recover(
    x: &DenseMatrix,
    f: &NmfFactors,
    svd: &TruncatedSvd,
    k: usize,
) -> Result<AugmentedFactors> {
    let (spectrum, directions) = lambda_spectrum(svd, f)?;
    let y = select_directions(&spectrum, &directions, k)?;
    let candidate = solve_s_alpha(x, f, &y)?;
    let (w_new, h_new, zeroed) = truncate_pairs(&candidate.s, &candidate.y);

    // Existing components rescaled by alpha, then the surviving new pairs.
    let r0 = f.rank();
    let kept: Vec<usize> = (0..k).filter(|j| !zeroed.contains(j)).collect();
    let mut w = DenseMatrix::zeros(x.rows(), r0 + kept.len());
    let mut h = DenseMatrix::zeros(r0 + kept.len(), x.cols());
    for p in 0..r0 {
        for i in 0..x.rows() {
            w[(i, p)] = f.w[(i, p)] * candidate.alpha[p];
        }
        h.row_mut(p).copy_from_slice(f.h.row(p));
    }
    for (idx, &j) in kept.iter().enumerate() {
        for i in 0..x.rows() {
            w[(i, r0 + idx)] = w_new[(i, j)];
        }
        h.row_mut(r0 + idx).copy_from_slice(h_new.row(j));
    }

    let beta = rescale_beta(x, &w, &h)?;
    for (p, &b) in beta.iter().enumerate() {
        w.scale_col(p, b);
    }

    Ok(AugmentedFactors {
        w_g: w,
        h_g: h,
        beta,
        dropped: zeroed,
    })
}

/// Inverse of a small symmetric positive definite matrix by Cholesky.
/// Returns `None` when a pivot collapses relative to the largest diagonal.
fn spd_inverse(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    if n == 0 {
        return Some(DenseMatrix::zeros(0, 0));
    }
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 1e-12 * max_diag {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    // Invert by solving L L^T z = e_j for each basis vector.
    let mut inv = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[(i, k)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        inv.set_col(j, &col);
    }
    Some(inv)
}
