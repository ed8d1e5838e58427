//! Shared test oracles. Everything here is deliberately independent of the
//! library's solve paths: the eigensolver is a two-sided Jacobi on an
//! explicitly formed symmetric matrix, linear systems go through
//! Gauss-Jordan, and the NNLS reference enumerates active sets outright.

#![allow(dead_code)]

use gsvdnmf::matrix::DenseMatrix;
use gsvdnmf::nmf::NmfFactors;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, lo: f64, hi: f64) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| lo + (hi - lo) * rng.random::<f64>())
}

pub fn random_nonneg(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
    random_matrix(rng, m, n, 0.01, 1.0)
}

/// Eigen-decomposition of a symmetric matrix by cyclic two-sided Jacobi
/// rotations. Returns eigenvalues sorted descending with their vectors as
/// the columns of the second component.
pub fn jacobi_eigh(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-14 * (m.fro_norm() + 1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for i in 0..n {
                    let mpi = m[(p, i)];
                    let mqi = m[(q, i)];
                    m[(p, i)] = c * mpi - s * mqi;
                    m[(q, i)] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (m[(i, i)], v.col_to_vec(i))).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let vals = pairs.iter().map(|p| p.0).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (j, (_, col)) in pairs.iter().enumerate() {
        vecs.set_col(j, col);
    }
    (vals, vecs)
}

/// Gauss-Jordan inversion with partial pivoting. `None` on a collapsing
/// pivot.
pub fn gauss_jordan_inverse(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut work = a.clone();
    let mut inv = DenseMatrix::identity(n);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if work[(r, col)].abs() > work[(piv, col)].abs() {
                piv = r;
            }
        }
        if work[(piv, col)].abs() < 1e-13 * (a.max_abs() + 1e-300) {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let t = work[(piv, j)];
                work[(piv, j)] = work[(col, j)];
                work[(col, j)] = t;
                let t = inv[(piv, j)];
                inv[(piv, j)] = inv[(col, j)];
                inv[(col, j)] = t;
            }
        }
        let d = work[(col, col)];
        for j in 0..n {
            work[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[(r, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                work[(r, j)] -= f * work[(col, j)];
                inv[(r, j)] -= f * inv[(col, j)];
            }
        }
    }
    Some(inv)
}

/// Entrywise double-loop evaluation of `0.5 * ||x - w h||^2`.
pub fn naive_objective(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> f64 {
    let (m, n) = x.shape();
    let r = w.cols();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let mut fit = 0.0;
            for p in 0..r {
                fit += w[(i, p)] * h[(p, j)];
            }
            let d = x[(i, j)] - fit;
            total += d * d;
        }
    }
    0.5 * total
}

pub fn nnls_objective(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    a.mul_vec(x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| (ax - bi) * (ax - bi))
        .sum()
}

/// Exhaustive NNLS reference: for every support set, solve the unconstrained
/// least squares on that support (via normal equations and Gauss-Jordan),
/// keep feasible candidates, and return the best objective found.
pub fn brute_force_nnls(a: &DenseMatrix, b: &[f64]) -> (Vec<f64>, f64) {
    let n = a.cols();
    assert!(n <= 16, "brute force enumeration limited to small n");
    let mut best_x = vec![0.0; n];
    let mut best_obj = nnls_objective(a, b, &best_x);
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let p = support.len();
        if p > a.rows() {
            continue;
        }
        let mut gram = DenseMatrix::zeros(p, p);
        let mut rhs = vec![0.0; p];
        for (ii, &ci) in support.iter().enumerate() {
            for (jj, &cj) in support.iter().enumerate() {
                let mut s = 0.0;
                for r in 0..a.rows() {
                    s += a[(r, ci)] * a[(r, cj)];
                }
                gram[(ii, jj)] = s;
            }
            let mut s = 0.0;
            for r in 0..a.rows() {
                s += a[(r, ci)] * b[r];
            }
            rhs[ii] = s;
        }
        let Some(inv) = gauss_jordan_inverse(&gram) else {
            continue;
        };
        let z = inv.mul_vec(&rhs);
        if z.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (ii, &c) in support.iter().enumerate() {
            x[c] = z[ii].max(0.0);
        }
        let obj = nnls_objective(a, b, &x);
        if obj < best_obj {
            best_obj = obj;
            best_x = x;
        }
    }
    (best_x, best_obj)
}

/// Finite generalized eigenvalues of the pencil `(diag(sigma)^2, a^T a)` for
/// full-rank `a`: explicit inversion of `a^T a` followed by a symmetric
/// eigensolve of the congruent form `S (a^T a)^{-1} S`.
pub fn pencil_lambdas_full_rank(sigma: &[f64], a: &DenseMatrix) -> Option<Vec<f64>> {
    let ata = a.tr_mul(a);
    let inv = gauss_jordan_inverse(&ata)?;
    let n = sigma.len();
    let sym = DenseMatrix::from_fn(n, n, |i, j| sigma[i] * inv[(i, j)] * sigma[j]);
    let (vals, _) = jacobi_eigh(&sym);
    Some(vals)
}

/// Finite generalized eigenvalues for possibly rank-deficient `a`: the
/// nonzero eigenvalues `mu` of `S^{-1} a^T a S^{-1}` give `lambda = 1/mu`.
/// `rank` fixes how many eigenvalues count as nonzero.
pub fn pencil_lambdas_rank_aware(sigma: &[f64], a: &DenseMatrix, rank: usize) -> Vec<f64> {
    let ata = a.tr_mul(a);
    let n = sigma.len();
    let sym = DenseMatrix::from_fn(n, n, |i, j| ata[(i, j)] / (sigma[i] * sigma[j]));
    let (mu, _) = jacobi_eigh(&sym);
    let mut lambdas: Vec<f64> = mu.iter().take(rank).map(|&m| 1.0 / m).collect();
    lambdas.sort_by(|x, y| y.partial_cmp(x).unwrap());
    lambdas
}

/// Similarity of two rank-one components as the cosine of their outer
/// products, which factors into the product of the factor cosines.
pub fn component_cosine(w1: &[f64], h1: &[f64], w2: &[f64], h2: &[f64]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let nrm = |a: &[f64]| dot(a, a).sqrt();
    let dw = nrm(w1) * nrm(w2);
    let dh = nrm(h1) * nrm(h2);
    if dw == 0.0 || dh == 0.0 {
        return 0.0;
    }
    (dot(w1, w2) / dw) * (dot(h1, h2) / dh)
}

pub fn similarity_matrix(rec: &NmfFactors, truth: &NmfFactors) -> DenseMatrix {
    let r = rec.rank();
    let t = truth.rank();
    DenseMatrix::from_fn(r, t, |i, j| {
        component_cosine(
            &rec.w.col_to_vec(i),
            rec.h.row(i),
            &truth.w.col_to_vec(j),
            truth.h.row(j),
        )
    })
}

/// Maximum-sum assignment over a square similarity matrix by bitmask DP
/// (exact for n <= ~20). Returns the matched column for each row and the
/// per-row similarities.
pub fn best_assignment(sim: &DenseMatrix) -> (Vec<usize>, Vec<f64>) {
    let n = sim.rows();
    assert_eq!(n, sim.cols(), "assignment needs equal component counts");
    let full = 1usize << n;
    let mut dp = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    dp[0] = 0.0;
    for mask in 0..full {
        if dp[mask] == f64::NEG_INFINITY {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == n {
            continue;
        }
        for col in 0..n {
            if mask & (1 << col) != 0 {
                continue;
            }
            let next = mask | (1 << col);
            let cand = dp[mask] + sim[(row, col)];
            if cand > dp[next] {
                dp[next] = cand;
                choice[next] = col;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    let mut mask = full - 1;
    for row in (0..n).rev() {
        let col = choice[mask];
        assignment[row] = col;
        mask &= !(1 << col);
    }
    let scores = (0..n).map(|r| sim[(r, assignment[r])]).collect();
    (assignment, scores)
}

/// Reference NMF solver: multiplicative updates (kept out of the library on
/// purpose; it exists only to cross-check HALS results).
pub fn multiplicative_update_nmf(
    x: &DenseMatrix,
    mut w: DenseMatrix,
    mut h: DenseMatrix,
    iters: usize,
) -> (DenseMatrix, DenseMatrix) {
    const FLOOR: f64 = 1e-12;
    for _ in 0..iters {
        // h <- h * (w^T x) / (w^T w h)
        let wtx = w.tr_mul(x);
        let wtwh = w.tr_mul(&w).mul(&h);
        for i in 0..h.rows() {
            for j in 0..h.cols() {
                h[(i, j)] *= wtx[(i, j)] / wtwh[(i, j)].max(FLOOR);
            }
        }
        // w <- w * (x h^T) / (w h h^T)
        let xht = x.mul_tr(&h);
        let whht = w.mul(&h.mul_tr(&h));
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                w[(i, j)] *= xht[(i, j)] / whht[(i, j)].max(FLOOR);
            }
        }
    }
    (w, h)
}
