//! Dominant-sign splitting of a (column, row) pair into a nonnegative pair.
//! Shared by the SVD-based initializer and the recovery step.

use crate::matrix::norm;

/// Splits `(s, y)` into its positive parts and its negated negative parts,
/// keeps the pair with the larger joint mass `mu = ||s_part|| * ||y_part||`
/// (ties toward the positive pair), and returns the kept parts rescaled to
/// `sqrt(mu)` each so the outer product keeps the mass of the kept part.
///
/// An all-zero kept pair comes back as zero vectors.
pub(crate) fn dominant_sign_pair(s: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s_pos: Vec<f64> = s.iter().map(|&v| v.max(0.0)).collect();
    let y_pos: Vec<f64> = y.iter().map(|&v| v.max(0.0)).collect();
    let s_neg: Vec<f64> = s.iter().map(|&v| (-v).max(0.0)).collect();
    let y_neg: Vec<f64> = y.iter().map(|&v| (-v).max(0.0)).collect();

    let mu_pos = norm(&s_pos) * norm(&y_pos);
    let mu_neg = norm(&s_neg) * norm(&y_neg);

    let (mu, s_keep, y_keep) = if mu_pos >= mu_neg {
        (mu_pos, s_pos, y_pos)
    } else {
        (mu_neg, s_neg, y_neg)
    };

    if mu == 0.0 {
        return (vec![0.0; s.len()], vec![0.0; y.len()]);
    }

    let root = mu.sqrt();
    let sn = norm(&s_keep);
    let yn = norm(&y_keep);
    let w = s_keep.iter().map(|v| root * v / sn).collect();
    let h = y_keep.iter().map(|v| root * v / yn).collect();
    (w, h)
}
