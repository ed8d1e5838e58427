//! HALS-based nonnegative matrix factorization: the solver, its stopping
//! rule, the fitting-error metric, and the random / SVD-based initializers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{norm_sq, DenseMatrix};
use crate::svd::truncated_svd;
use crate::truncation::dominant_sign_pair;

/// A nonnegative factor pair `x ≈ w * h` with `w` of shape m x r and `h` of
/// shape r x n.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
}

impl NmfFactors {
    pub fn new(w: DenseMatrix, h: DenseMatrix) -> Result<Self> {
        if w.cols() != h.rows() {
            return Err(Error::ShapeMismatch(format!(
                "factor ranks disagree: w is {}x{}, h is {}x{}",
                w.rows(),
                w.cols(),
                h.rows(),
                h.cols()
            )));
        }
        if !w.is_nonnegative() || !h.is_nonnegative() {
            return Err(Error::NegativeEntry {
                row: 0,
                col: 0,
                value: w.min_entry().min(h.min_entry()),
            });
        }
        Ok(Self { w, h })
    }

    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    /// First `r` components, bit-identical to the originals. This is the
    /// shared-initialization hook: a rank-r draw truncated to r' components
    /// equals the rank-r' draw of the same seed.
    pub fn truncate_rank(&self, r: usize) -> Self {
        assert!(r <= self.rank());
        let w = DenseMatrix::from_fn(self.w.rows(), r, |i, j| self.w[(i, j)]);
        let h = DenseMatrix::from_fn(r, self.h.cols(), |i, j| self.h[(i, j)]);
        Self { w, h }
    }

    pub fn product(&self) -> DenseMatrix {
        self.w.mul(&self.h)
    }
}

/// HALS stopping parameters. `epsilon` bounds the per-component relative
/// change (squared norms on both sides) that counts as converged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub epsilon: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 10_000,
            seed: 0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || self.epsilon.is_nan() {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// `0.5 * ||x - w h||_F^2`
pub fn objective(x: &DenseMatrix, f: &NmfFactors) -> Result<f64> {
    if f.w.rows() != x.rows() || f.h.cols() != x.cols() {
        return Err(Error::ShapeMismatch(format!(
            "objective: x is {}x{}, w h is {}x{}",
            x.rows(),
            x.cols(),
            f.w.rows(),
            f.h.cols()
        )));
    }
    Ok(0.5 * x.sub(&f.product()).fro_norm_sq())
}

/// Relative fitting error in percent: `100 * ||x - w h||_F^2 / ||x||_F^2`.
pub fn relative_fitting_error(x: &DenseMatrix, f: &NmfFactors) -> Result<f64> {
    let denom = x.fro_norm_sq();
    if denom == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(100.0 * 2.0 * objective(x, f)? / denom)
}

/// Random positive initialization.
///
/// Component j draws its column of `w` then its row of `h` from an
/// independent seeded stream, uniform on (0, 1] scaled by
/// `sqrt(mean(x) / (j + 1))`. Per-component streams make the first r - 1
/// components of a rank-r draw bit-identical to the rank-(r-1) draw of the
/// same seed, which the restart-comparison protocol relies on.
pub fn init_random(x: &DenseMatrix, r: usize, seed: u64) -> Result<NmfFactors> {
    let (m, n) = x.shape();
    if r == 0 {
        return Err(Error::RankOutOfRange {
            rank: r,
            rows: m,
            cols: n,
        });
    }
    let mean = x.mean();
    if mean <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let mut w = DenseMatrix::zeros(m, r);
    let mut h = DenseMatrix::zeros(r, n);
    for j in 0..r {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64 + 1);
        let scale = (mean / (j as f64 + 1.0)).sqrt();
        for i in 0..m {
            w[(i, j)] = (1.0 - rng.random::<f64>()) * scale;
        }
        for i in 0..n {
            h[(j, i)] = (1.0 - rng.random::<f64>()) * scale;
        }
    }
    Ok(NmfFactors { w, h })
}

/// SVD-based initializer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NndsvdVariant {
    /// Dominant-sign truncation only; may leave exact zeros.
    Plain,
    /// Zeros replaced by the mean of `x`.
    A,
    /// Zeros replaced by seeded uniform values on (0, mean(x) / 100].
    Ar,
}

/// NNDSVD initialization: the leading singular triplet is kept as-is (it is
/// nonnegative for nonnegative input up to round-off, which is clamped), and
/// each following pair is reduced to its dominant sign pair scaled by
/// `sqrt(sigma_j)`.
pub fn init_nndsvd(
    x: &DenseMatrix,
    r: usize,
    variant: NndsvdVariant,
    seed: u64,
) -> Result<NmfFactors> {
    let (m, n) = x.shape();
    let svd = truncated_svd(x, r)?;
    let mut w = DenseMatrix::zeros(m, r);
    let mut h = DenseMatrix::zeros(r, n);

    let s0 = svd.sigma[0].sqrt();
    for i in 0..m {
        w[(i, 0)] = (s0 * svd.u[(i, 0)]).max(0.0);
    }
    for i in 0..n {
        h[(0, i)] = (s0 * svd.v[(i, 0)]).max(0.0);
    }

    for j in 1..r {
        let root = svd.sigma[j].sqrt();
        let uj: Vec<f64> = (0..m).map(|i| root * svd.u[(i, j)]).collect();
        let vj: Vec<f64> = (0..n).map(|i| root * svd.v[(i, j)]).collect();
        let (wj, hj) = dominant_sign_pair(&uj, &vj);
        for (i, &v) in wj.iter().enumerate() {
            w[(i, j)] = v;
        }
        for (i, &v) in hj.iter().enumerate() {
            h[(j, i)] = v;
        }
    }

    match variant {
        NndsvdVariant::Plain => {}
        NndsvdVariant::A => {
            let mean = x.mean();
            fill_zeros(&mut w, |_| mean);
            fill_zeros(&mut h, |_| mean);
        }
        NndsvdVariant::Ar => {
            let bound = x.mean() / 100.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            fill_zeros(&mut w, |_| (1.0 - rng.random::<f64>()) * bound);
            fill_zeros(&mut h, |_| (1.0 - rng.random::<f64>()) * bound);
        }
    }

    Ok(NmfFactors { w, h })
}

fn fill_zeros(mat: &mut DenseMatrix, mut value: impl FnMut(usize) -> f64) {
    let (rows, cols) = mat.shape();
    let mut counter = 0usize;
    for i in 0..rows {
        for j in 0..cols {
            if mat[(i, j)] == 0.0 {
                mat[(i, j)] = value(counter);
                counter += 1;
            }
        }
    }
}

/// Result of a HALS run.
#[derive(Debug, Clone)]
pub struct HalsRun {
    pub factors: NmfFactors,
    pub sweeps: usize,
    /// Objective after the final sweep.
    pub objective: f64,
    /// Objective after each sweep.
    pub objective_trace: Vec<f64>,
    /// Whether the stopping rule (rather than the sweep cap) ended the run.
    pub converged: bool,
}

/// Runs HALS from `init` until the per-component relative-change rule holds
/// for every column of `w` and row of `h`, or `max_iters` sweeps elapse.
///
/// One sweep updates every column of `w` then every row of `h`, each with
/// the exact nonnegative coordinate-block minimizer, so the objective never
/// increases across sweeps. A component whose column or row collapses to
/// zero is re-seeded from the positive part of the residual before the next
/// sweep.
pub fn run_hals(x: &DenseMatrix, init: NmfFactors, settings: SolverSettings) -> Result<HalsRun> {
    settings.validate()?;
    if init.w.rows() != x.rows() || init.h.cols() != x.cols() {
        return Err(Error::ShapeMismatch(format!(
            "run_hals: x is {}x{}, init is {}x{} * {}x{}",
            x.rows(),
            x.cols(),
            init.w.rows(),
            init.w.cols(),
            init.h.rows(),
            init.h.cols()
        )));
    }
    if init.w.is_zero() || init.h.is_zero() {
        return Err(Error::AllZeroInit);
    }

    let mut wt = init.w.transpose();
    let mut h = init.h;
    let r = wt.rows();
    let x_norm_sq = x.fro_norm_sq();

    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < settings.max_iters {
        let wt_prev = wt.clone();
        let h_prev = h.clone();

        let obj = sweep_in_place(x, &mut wt, &mut h, x_norm_sq);
        sweeps += 1;
        trace.push(obj);

        let mut done = true;
        for j in 0..r {
            if !component_converged(wt.row(j), wt_prev.row(j), settings.epsilon)
                || !component_converged(h.row(j), h_prev.row(j), settings.epsilon)
            {
                done = false;
                break;
            }
        }
        if done {
            converged = true;
            break;
        }
    }

    let objective = trace.last().copied().unwrap_or(0.5 * x_norm_sq);
    Ok(HalsRun {
        factors: NmfFactors {
            w: wt.transpose(),
            h,
        },
        sweeps,
        objective,
        objective_trace: trace,
        converged,
    })
}

/// The stopping rule, per component: squared change bounded by epsilon times
/// the squared sum.
fn component_converged(new: &[f64], old: &[f64], epsilon: f64) -> bool {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (a, b) in new.iter().zip(old) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    diff <= epsilon * sum
}

/// One full HALS sweep on `factors`, in place. Returns the objective after
/// the sweep. Exposed so callers can drive the iteration themselves; the
/// float sequence is identical to `run_hals`'s internal loop.
pub fn hals_sweep(x: &DenseMatrix, factors: &mut NmfFactors) -> Result<f64> {
    if factors.w.rows() != x.rows() || factors.h.cols() != x.cols() {
        return Err(Error::ShapeMismatch("hals_sweep: nonconforming".into()));
    }
    let mut wt = factors.w.transpose();
    let mut h = factors.h.clone();
    let obj = sweep_in_place(x, &mut wt, &mut h, x.fro_norm_sq());
    factors.w = wt.transpose();
    factors.h = h;
    Ok(obj)
}

/// Re-seeds dead components, runs a W half-sweep then an H half-sweep, and
/// returns the objective computed from the sweep's own cross products.
/// `wt` is the transposed W so both factors are touched row-wise.
fn sweep_in_place(
    x: &DenseMatrix,
    wt: &mut DenseMatrix,
    h: &mut DenseMatrix,
    x_norm_sq: f64,
) -> f64 {
    reseed_dead_components(x, wt, h);
    let r = wt.rows();
    let m = wt.cols();
    let n = h.cols();

    // W half-sweep: wt_j <- max(0, wt_j + (H X^T)_j - (H H^T W^T)_j / (H H^T)_jj)
    let bt = h.mul_tr(x); // r x m
    let gram_h = h.mul_tr(h); // r x r
    let mut acc = vec![0.0; m];
    for j in 0..r {
        let denom = gram_h[(j, j)];
        if denom == 0.0 {
            continue; // dead component, left for the next re-seed pass
        }
        acc.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..r {
            let coef = gram_h[(j, k)];
            if coef == 0.0 {
                continue;
            }
            for (a, &wv) in acc.iter_mut().zip(wt.row(k)) {
                *a += coef * wv;
            }
        }
        let bt_row = bt.row(j);
        let w_row = wt.row_mut(j);
        for i in 0..m {
            w_row[i] = (w_row[i] + (bt_row[i] - acc[i]) / denom).max(0.0);
        }
    }

    // H half-sweep, symmetric, with the refreshed W.
    let ct = wt.mul(x); // r x n
    let gram_w = wt.mul_tr(wt); // r x r
    let mut acc = vec![0.0; n];
    for j in 0..r {
        let denom = gram_w[(j, j)];
        if denom == 0.0 {
            continue;
        }
        acc.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..r {
            let coef = gram_w[(j, k)];
            if coef == 0.0 {
                continue;
            }
            for (a, &hv) in acc.iter_mut().zip(h.row(k)) {
                *a += coef * hv;
            }
        }
        let ct_row = ct.row(j);
        let h_row = h.row_mut(j);
        for i in 0..n {
            h_row[i] = (h_row[i] + (ct_row[i] - acc[i]) / denom).max(0.0);
        }
    }

    // Objective from the same cross products:
    // ||x - w h||^2 = ||x||^2 - 2 <W^T X, H> + <W^T W, H H^T>.
    let gram_h = h.mul_tr(h);
    let mut cross = 0.0;
    let mut quad = 0.0;
    for j in 0..r {
        for (cv, hv) in ct.row(j).iter().zip(h.row(j)) {
            cross += cv * hv;
        }
        for k in 0..r {
            quad += gram_w[(j, k)] * gram_h[(j, k)];
        }
    }
    (0.5 * (x_norm_sq - 2.0 * cross + quad)).max(0.0)
}

/// Replaces zero components with clamped least-squares fits against the
/// current residual. Each assignment is an exact one-block minimization (or
/// touches a factor whose partner is zero), so the objective cannot rise.
fn reseed_dead_components(x: &DenseMatrix, wt: &mut DenseMatrix, h: &mut DenseMatrix) {
    let r = wt.rows();
    let dead: Vec<usize> = (0..r)
        .filter(|&j| norm_sq(wt.row(j)) == 0.0 || norm_sq(h.row(j)) == 0.0)
        .collect();
    if dead.is_empty() {
        return;
    }

    let mut residual = x.sub(&wt.transpose().mul(h));
    for j in dead {
        let w_dead = norm_sq(wt.row(j)) == 0.0;
        let h_dead = norm_sq(h.row(j)) == 0.0;
        if w_dead && h_dead {
            // Seed the row from the residual row with the largest positive
            // part, then fit the column against it.
            let n = h.cols();
            let mut best = 0usize;
            let mut best_mass = -1.0;
            for i in 0..x.rows() {
                let mass = residual
                    .row(i)
                    .iter()
                    .map(|&v| v.max(0.0) * v.max(0.0))
                    .sum::<f64>();
                if mass > best_mass {
                    best_mass = mass;
                    best = i;
                }
            }
            for i in 0..n {
                h.row_mut(j)[i] = residual[(best, i)].max(0.0);
            }
        }
        let h_norm = norm_sq(h.row(j));
        if norm_sq(wt.row(j)) == 0.0 && h_norm > 0.0 {
            let fit = residual.mul_vec(h.row(j));
            for (i, &v) in fit.iter().enumerate() {
                wt.row_mut(j)[i] = (v / h_norm).max(0.0);
            }
        }
        let w_norm = norm_sq(wt.row(j));
        if norm_sq(h.row(j)) == 0.0 && w_norm > 0.0 {
            let fit = residual.tr_mul_vec(wt.row(j));
            for (i, &v) in fit.iter().enumerate() {
                h.row_mut(j)[i] = (v / w_norm).max(0.0);
            }
        }
        // Keep the residual current for the next dead component.
        if norm_sq(wt.row(j)) > 0.0 && norm_sq(h.row(j)) > 0.0 {
            for i in 0..x.rows() {
                let wv = wt[(j, i)];
                if wv == 0.0 {
                    continue;
                }
                for (res, &hv) in residual.row_mut(i).iter_mut().zip(h.row(j)) {
                    *res -= wv * hv;
                }
            }
        }
    }
}
