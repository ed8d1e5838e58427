//! Nonnegative least squares by the Lawson-Hanson active-set method.
//!
//! Deterministic by construction: the entering variable is the largest
//! positive dual component with ties broken by lowest index, and the
//! passive-set least-squares subproblems are solved by Householder QR in
//! ascending column order.

use crate::error::{Error, Result};
use crate::matrix::{norm_sq, DenseMatrix};

/// Relative tolerance on the dual vector `a^T (b - a x)`; coordinates whose
/// dual falls below `KKT_TOL_REL * ||a^T b||_inf` are considered optimal.
const KKT_TOL_REL: f64 = 1e-10;

/// Minimizes `||a x - b||^2` subject to `x >= 0`.
///
/// The returned vector is entrywise nonnegative exactly (no negative
/// round-off residue). Fails with `IterationCap` after `3 * n` active-set
/// swaps, which signals numerical breakdown.
pub fn nnls(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "nnls: matrix is {}x{} but rhs has length {}",
            m,
            n,
            b.len()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("nnls operands must be nonempty".into()));
    }

    let atb = a.tr_mul_vec(b);
    let tol = KKT_TOL_REL * atb.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let mut x = vec![0.0; n];
    let mut passive: Vec<usize> = Vec::new();
    let cap = 3 * n;
    let mut swaps = 0usize;

    'outer: loop {
        let residual: Vec<f64> = a
            .mul_vec(&x)
            .iter()
            .zip(b)
            .map(|(ax, bi)| bi - ax)
            .collect();
        let w = a.tr_mul_vec(&residual);

        // Entering variable: largest positive dual among free coordinates,
        // skipping candidates whose column is numerically dependent on the
        // passive set or whose unconstrained coefficient would not be
        // positive (the classic rejection rule).
        let mut rejected = vec![false; n];
        let (enter, mut z) = loop {
            let mut best: Option<usize> = None;
            for j in 0..n {
                if passive.contains(&j) || rejected[j] || w[j] <= tol {
                    continue;
                }
                if best.is_none_or(|bj| w[j] > w[bj]) {
                    best = Some(j);
                }
            }
            let Some(j) = best else { break 'outer };
            let mut trial = passive.clone();
            let pos = trial.partition_point(|&p| p < j);
            trial.insert(pos, j);
            match ls_solve(a, &trial, b) {
                Some(z) if z[pos] > 0.0 => break (j, z),
                _ => rejected[j] = true,
            }
        };

        let pos = passive.partition_point(|&p| p < enter);
        passive.insert(pos, enter);
        swaps += 1;
        if swaps > cap {
            return Err(Error::IterationCap(swaps));
        }

        // Feasibility loop: interpolate toward the unconstrained solution,
        // demoting coordinates driven to zero.
        loop {
            if z.iter().all(|&v| v > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (idx, &p) in passive.iter().enumerate() {
                    x[p] = z[idx];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (idx, &p) in passive.iter().enumerate() {
                if z[idx] <= 0.0 {
                    let t = x[p] / (x[p] - z[idx]);
                    if t < alpha {
                        alpha = t;
                    }
                }
            }
            for (idx, &p) in passive.iter().enumerate() {
                x[p] += alpha * (z[idx] - x[p]);
            }
            let scale = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let mut kept = Vec::with_capacity(passive.len());
            for (idx, &p) in passive.iter().enumerate() {
                if z[idx] <= 0.0 && x[p] <= 1e-12 * scale {
                    x[p] = 0.0;
                } else {
                    kept.push(p);
                }
            }
            debug_assert!(kept.len() < passive.len(), "feasibility loop must shrink");
            passive = kept;
            swaps += 1;
            if swaps > cap {
                return Err(Error::IterationCap(swaps));
            }
            match ls_solve(a, &passive, b) {
                Some(next) => z = next,
                None => return Err(Error::IterationCap(swaps)),
            }
        }
    }

    // Exact nonnegativity on the way out.
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(x)
}

/// Least squares `min ||a[:, cols] z - b||` by Householder QR.
/// Returns `None` when the selected columns are numerically dependent.
fn ls_solve(a: &DenseMatrix, cols: &[usize], b: &[f64]) -> Option<Vec<f64>> {
    let m = a.rows();
    let p = cols.len();
    if p == 0 {
        return Some(Vec::new());
    }
    if p > m {
        return None;
    }
    let mut work: Vec<Vec<f64>> = cols.iter().map(|&j| a.col_to_vec(j)).collect();
    let full_norms: Vec<f64> = work.iter().map(|c| norm_sq(c).sqrt()).collect();
    let mut rhs = b.to_vec();

    for k in 0..p {
        let tail = norm_sq(&work[k][k..]).sqrt();
        if tail <= 1e-12 * full_norms[k] || tail == 0.0 {
            return None;
        }
        let alpha = if work[k][k] > 0.0 { -tail } else { tail };
        let mut v = work[k][k..].to_vec();
        v[0] -= alpha;
        let vtv = norm_sq(&v);
        if vtv > 0.0 {
            for col in work.iter_mut().skip(k + 1) {
                reflect(&mut col[k..], &v, vtv);
            }
            reflect(&mut rhs[k..], &v, vtv);
        }
        work[k][k] = alpha;
        for e in work[k][k + 1..].iter_mut() {
            *e = 0.0;
        }
    }

    let mut z = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..p {
            s -= work[j][k] * z[j];
        }
        z[k] = s / work[k][k];
    }
    Some(z)
}

#[inline]
fn reflect(target: &mut [f64], v: &[f64], vtv: f64) {
    let coeff = 2.0 * crate::matrix::dot(target, v) / vtv;
    for (t, &vi) in target.iter_mut().zip(v) {
        *t -= coeff * vi;
    }
}
