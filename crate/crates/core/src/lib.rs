//! GSVD-NMF: recovering missing components from under-complete nonnegative
//! matrix factorizations.
//!
//! A rank-r0 NMF that has too few components (or landed in a poor local
//! optimum) blends or misses features. This crate compares such a solution
//! against the truncated SVD of the same matrix through a generalized SVD,
//! proposes the directions where the two disagree most, fits companion
//! columns and amplitudes for them with a convex solve, and refines the
//! augmented factorization with HALS.
//!
//! The pieces are usable on their own:
//!
//! * [`matrix::DenseMatrix`] - dense row-major storage.
//! * [`svd`] - truncated SVD by one-sided Jacobi rotations.
//! * [`gsvd`] - generalized SVD of a (positive diagonal, dense) pair.
//! * [`nnls`](mod@nnls) - Lawson-Hanson nonnegative least squares.
//! * [`nmf`] - HALS solver, stopping rule, NNDSVD and random initializers.
//! * [`recovery`] - direction proposal and factor augmentation.
//! * [`pipeline`] - the two-stage pipeline, synthetic data, and the
//!   random-restart comparison harness.
//! * [`io`] - CSV / MatrixMarket parsing and reproducible result files.
//!
//! ```
//! use gsvdnmf::pipeline::{
//!     gen_synthetic, run_pipeline, InitMethod, PipelineConfig, SvdRank,
//! };
//!
//! let (x, _truth) = gen_synthetic(5, 40, 50, 0.0, 0)?;
//! let cfg = PipelineConfig {
//!     r0: 4,
//!     k: 1,
//!     epsilon0: 1e-3,
//!     epsilon: 1e-3,
//!     svd_rank: SvdRank::R0,
//!     init: InitMethod::Nndsvd,
//!     seed: 0,
//!     max_iters: 10_000,
//! };
//! let run = run_pipeline(&x, &cfg)?;
//! assert!(run.fit < 1.0, "relative fitting error {}%", run.fit);
//! # Ok::<(), gsvdnmf::Error>(())
//! ```

pub mod error;
pub mod gsvd;
pub mod io;
pub mod matrix;
pub mod nmf;
pub mod nnls;
pub mod pipeline;
pub mod recovery;
pub mod svd;
mod truncation;

pub use error::{Error, Result};
pub use gsvd::{gsvd_pair, GsvdResult};
pub use matrix::DenseMatrix;
pub use nmf::{
    init_nndsvd, init_random, objective, relative_fitting_error, run_hals, HalsRun, NmfFactors,
    NndsvdVariant, SolverSettings,
};
pub use nnls::nnls;
pub use pipeline::{
    diagonal_histogram, gen_synthetic, run_comparison, run_pipeline, run_standard,
    DiagonalHistogram, InitMethod, PipelineConfig, SvdRank, TrialResult,
};
pub use recovery::{
    lambda_spectrum, recover, rescale_beta, select_directions, solve_s_alpha, truncate_pairs,
    AugmentedFactors, LambdaSpectrum, RecoveryCandidate,
};
pub use svd::{truncated_svd, TruncatedSvd};
