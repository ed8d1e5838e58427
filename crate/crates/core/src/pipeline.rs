//! The two-stage pipeline and the random-restart comparison harness.
//!
//! Stage 1 runs HALS at the under-complete rank r0 (tolerance epsilon0),
//! the recovery step proposes k additional components from the truncated
//! SVD, and stage 2 refines the augmented factors with HALS (tolerance
//! epsilon). The harness pairs that pipeline against standard NMF across
//! seeded restarts sharing as much initialization as the rank difference
//! allows.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::nmf::{
    init_nndsvd, init_random, relative_fitting_error, run_hals, NmfFactors, NndsvdVariant,
    SolverSettings,
};
use crate::recovery::recover;
use crate::svd::truncated_svd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Random,
    Nndsvd,
    Nndsvda,
    Nndsvdar,
}

impl InitMethod {
    pub fn build(self, x: &DenseMatrix, r: usize, seed: u64) -> Result<NmfFactors> {
        match self {
            InitMethod::Random => init_random(x, r, seed),
            InitMethod::Nndsvd => init_nndsvd(x, r, NndsvdVariant::Plain, seed),
            InitMethod::Nndsvda => init_nndsvd(x, r, NndsvdVariant::A, seed),
            InitMethod::Nndsvdar => init_nndsvd(x, r, NndsvdVariant::Ar, seed),
        }
    }
}

/// Rank of the SVD handed to the recovery step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvdRank {
    /// Same rank as the under-complete factorization.
    #[serde(rename = "r0")]
    R0,
    /// Over-complete comparison: guarantees at least k infinite spectrum
    /// values, so missing directions are selected first.
    #[serde(rename = "r0+k")]
    R0PlusK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Under-complete rank for stage 1.
    pub r0: usize,
    /// Number of components the recovery step proposes.
    pub k: usize,
    /// Stage-1 stopping tolerance.
    pub epsilon0: f64,
    /// Final stopping tolerance.
    pub epsilon: f64,
    pub svd_rank: SvdRank,
    pub init: InitMethod,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            r0: 2,
            k: 1,
            epsilon0: 1e-4,
            epsilon: 1e-4,
            svd_rank: SvdRank::R0,
            init: InitMethod::Random,
            seed: 0,
            max_iters: 10_000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r0 < 2 {
            return Err(Error::InvalidConfig("r0 must be at least 2".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.epsilon0 <= 0.0
            || self.epsilon <= 0.0
            || self.epsilon0.is_nan()
            || self.epsilon.is_nan()
        {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }

    fn svd_rank_value(&self) -> usize {
        match self.svd_rank {
            SvdRank::R0 => self.r0,
            SvdRank::R0PlusK => self.r0 + self.k,
        }
    }
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub factors: NmfFactors,
    /// Relative fitting error, percent.
    pub fit: f64,
    pub sweeps_stage1: usize,
    pub sweeps_stage2: usize,
}

/// Outcome of one standard HALS run.
#[derive(Debug, Clone)]
pub struct StandardRun {
    pub factors: NmfFactors,
    pub fit: f64,
    pub sweeps: usize,
}

/// Per-trial record of the comparison harness. Fitting errors are percents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: usize,
    pub seed: u64,
    pub fit_standard: f64,
    pub fit_gsvd: f64,
    pub iters_standard: usize,
    pub iters_gsvd_stage1: usize,
    pub iters_gsvd_stage2: usize,
    /// Wall-clock seconds; informational only, never written to result files.
    pub wall_standard_s: f64,
    pub wall_gsvd_s: f64,
}

/// Runs the two-stage pipeline from the configured initialization.
pub fn run_pipeline(x: &DenseMatrix, cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let init = cfg.init.build(x, cfg.r0, cfg.seed)?;
    run_pipeline_from(x, init, cfg)
}

/// Runs the two-stage pipeline from explicitly provided stage-1 factors.
/// The comparison harness uses this to share a truncated random draw with
/// the standard run.
pub fn run_pipeline_from(
    x: &DenseMatrix,
    init: NmfFactors,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    cfg.validate()?;
    let (m, n) = x.shape();
    if cfg.r0 + cfg.k > m.min(n) {
        return Err(Error::RankOutOfRange {
            rank: cfg.r0 + cfg.k,
            rows: m,
            cols: n,
        });
    }
    if init.rank() != cfg.r0 {
        return Err(Error::ShapeMismatch(format!(
            "stage-1 init has rank {}, config says r0 = {}",
            init.rank(),
            cfg.r0
        )));
    }

    let stage1 = run_hals(
        x,
        init,
        SolverSettings {
            epsilon: cfg.epsilon0,
            max_iters: cfg.max_iters,
            seed: cfg.seed,
        },
    )?;

    let svd = truncated_svd(x, cfg.svd_rank_value())?;
    let augmented = recover(x, &stage1.factors, &svd, cfg.k)?;

    let stage2 = run_hals(
        x,
        augmented.into_factors()?,
        SolverSettings {
            epsilon: cfg.epsilon,
            max_iters: cfg.max_iters,
            seed: cfg.seed,
        },
    )?;

    let fit = relative_fitting_error(x, &stage2.factors)?;
    Ok(PipelineRun {
        factors: stage2.factors,
        fit,
        sweeps_stage1: stage1.sweeps,
        sweeps_stage2: stage2.sweeps,
    })
}

/// Single HALS run at rank `r` from the given initialization method.
pub fn run_standard(
    x: &DenseMatrix,
    r: usize,
    init: InitMethod,
    settings: SolverSettings,
) -> Result<StandardRun> {
    let start = init.build(x, r, settings.seed)?;
    let run = run_hals(x, start, settings)?;
    let fit = relative_fitting_error(x, &run.factors)?;
    Ok(StandardRun {
        factors: run.factors,
        fit,
        sweeps: run.sweeps,
    })
}

/// The restart-comparison protocol.
///
/// Trial t draws a rank-r random initialization with seed `cfg.seed + t`.
/// Standard NMF runs from the full draw; the pipeline runs from the first
/// `r - k` components of the same draw (bit-identical sharing), recovers k
/// components, and refines. Trials are independent and run in parallel;
/// results are ordered by trial id, so the output is deterministic for a
/// fixed seed.
pub fn run_comparison(
    x: &DenseMatrix,
    r: usize,
    n_trials: usize,
    cfg: &PipelineConfig,
) -> Result<Vec<TrialResult>> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    if r <= cfg.k || r - cfg.k < 2 {
        return Err(Error::InvalidConfig(format!(
            "comparison needs r - k >= 2, got r = {r}, k = {}",
            cfg.k
        )));
    }

    (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_add(t as u64);
            let full_init = init_random(x, r, seed)?;

            let t0 = Instant::now();
            let standard = run_hals(
                x,
                full_init.clone(),
                SolverSettings {
                    epsilon: cfg.epsilon,
                    max_iters: cfg.max_iters,
                    seed,
                },
            )?;
            let wall_standard_s = t0.elapsed().as_secs_f64();
            let fit_standard = relative_fitting_error(x, &standard.factors)?;

            let trial_cfg = PipelineConfig {
                r0: r - cfg.k,
                seed,
                ..*cfg
            };
            let t1 = Instant::now();
            let pipeline = run_pipeline_from(x, full_init.truncate_rank(r - cfg.k), &trial_cfg)?;
            let wall_gsvd_s = t1.elapsed().as_secs_f64();

            Ok(TrialResult {
                trial_id: t,
                seed,
                fit_standard,
                fit_gsvd: pipeline.fit,
                iters_standard: standard.sweeps,
                iters_gsvd_stage1: pipeline.sweeps_stage1,
                iters_gsvd_stage2: pipeline.sweeps_stage2,
                wall_standard_s,
                wall_gsvd_s,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Signed perpendicular distances of the (standard, pipeline) fitting-error
/// pairs from the equal-performance diagonal, with fixed-width bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalHistogram {
    pub distances: Vec<f64>,
    pub bins: Vec<HistogramBin>,
}

/// Default bin count for [`diagonal_histogram`].
pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

/// Distance per trial is `(fit_standard - fit_gsvd) / sqrt(2)`, positive
/// when the pipeline fits better.
pub fn diagonal_histogram(results: &[TrialResult], nbins: usize) -> Result<DiagonalHistogram> {
    if results.is_empty() {
        return Err(Error::EmptyInput("diagonal_histogram: no trials".into()));
    }
    if nbins == 0 {
        return Err(Error::InvalidConfig("nbins must be positive".into()));
    }
    let distances: Vec<f64> = results
        .iter()
        .map(|t| (t.fit_standard - t.fit_gsvd) / std::f64::consts::SQRT_2)
        .collect();
    let lo = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let bins = if lo == hi {
        vec![HistogramBin {
            lo,
            hi,
            count: distances.len(),
        }]
    } else {
        let width = (hi - lo) / nbins as f64;
        let mut counts = vec![0usize; nbins];
        for &d in &distances {
            let idx = (((d - lo) / width) as usize).min(nbins - 1);
            counts[idx] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                lo: lo + i as f64 * width,
                hi: if i + 1 == nbins {
                    hi
                } else {
                    lo + (i + 1) as f64 * width
                },
                count,
            })
            .collect()
    };

    Ok(DiagonalHistogram { distances, bins })
}

/// Amplitude cycle for the synthetic features. Distinct amplitudes keep the
/// nonnegative factorization identifiable even though neighboring bumps
/// overlap heavily.
const SYNTHETIC_AMPLITUDES: [f64; 10] = [1.0, 0.85, 1.15, 0.9, 1.05, 0.8, 1.1, 0.95, 1.2, 0.75];

/// Synthetic dataset with Gaussian-bump features.
///
/// Columns of the true `w` and rows of the true `h` are Gaussian bumps on an
/// overlapping chain of distinct centers (widths 0.65 of the center
/// spacing); the `w` amplitudes cycle through a fixed pattern. Two feature
/// pairs are pulled deliberately close in `w` so that an under-complete
/// factorization blends one of them. Ground truth is returned for
/// correlation scoring.
///
/// Noise is additive half-normal, scaled by `noise_level` times the mean of
/// the clean signal.
pub fn gen_synthetic(
    n_features: usize,
    m: usize,
    n: usize,
    noise_level: f64,
    seed: u64,
) -> Result<(DenseMatrix, NmfFactors)> {
    if n_features < 2 {
        return Err(Error::InvalidConfig(
            "gen_synthetic needs at least 2 features".into(),
        ));
    }
    if m < 4 * n_features || n < 4 * n_features {
        return Err(Error::InvalidConfig(
            "gen_synthetic: matrix too small for the feature count".into(),
        ));
    }

    let spacing_w = m as f64 / n_features as f64;
    let spacing_h = n as f64 / n_features as f64;
    let width_w = 0.65 * spacing_w;
    let width_h = 0.65 * spacing_h;

    let mut centers_w: Vec<f64> = (0..n_features)
        .map(|f| (f as f64 + 0.5) * spacing_w)
        .collect();
    let centers_h: Vec<f64> = (0..n_features)
        .map(|f| (f as f64 + 0.5) * spacing_h)
        .collect();
    // First overlapping pair: features 2 and 3 nearly coincide in w, so an
    // under-complete factorization merges them.
    if n_features >= 4 {
        centers_w[3] = centers_w[2] + 0.55 * spacing_w;
    }
    // Second overlapping pair, milder, toward the high end.
    if n_features >= 6 {
        let hi = n_features - 3;
        centers_w[hi + 1] = centers_w[hi] + 0.70 * spacing_w;
    }

    let bump = |pos: f64, center: f64, width: f64| {
        let z = (pos - center) / width;
        (-0.5 * z * z).exp()
    };
    let w = DenseMatrix::from_fn(m, n_features, |i, f| {
        SYNTHETIC_AMPLITUDES[f % SYNTHETIC_AMPLITUDES.len()] * bump(i as f64, centers_w[f], width_w)
    });
    let h = DenseMatrix::from_fn(n_features, n, |f, j| bump(j as f64, centers_h[f], width_h));
    let truth = NmfFactors::new(w, h)?;

    let mut x = truth.product();
    if noise_level > 0.0 {
        let scale = noise_level * x.mean();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..m {
            let row = x.row_mut(i);
            for v in row.iter_mut() {
                *v += scale * half_normal(&mut rng);
            }
        }
    }
    Ok((x, truth))
}

/// |N(0, 1)| by Box-Muller.
fn half_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    z.abs()
}
