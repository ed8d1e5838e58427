//! Shared fixtures for the criterion benchmarks.

use gsvdnmf::matrix::DenseMatrix;
use gsvdnmf::nmf::NmfFactors;
use gsvdnmf::pipeline::gen_synthetic;

/// The standard benchmark dataset: 8 bump features on a 120 x 150 grid with
/// 1% noise.
pub fn bench_dataset() -> (DenseMatrix, NmfFactors) {
    gen_synthetic(8, 120, 150, 0.01, 7).expect("benchmark dataset")
}
