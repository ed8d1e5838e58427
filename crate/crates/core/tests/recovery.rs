//! Recovery-step checks: the spectrum against the pencil eigensolve oracle,
//! the reduced quadratic against a dense evaluation of the full block form,
//! the companion solve against random probing, and the truncation step
//! against direct candidate comparison.

mod common;

use common::*;
use gsvdnmf::matrix::DenseMatrix;
use gsvdnmf::nmf::{init_nndsvd, init_random, run_hals, NmfFactors, NndsvdVariant, SolverSettings};
use gsvdnmf::pipeline::gen_synthetic;
use gsvdnmf::recovery::{
    lambda_spectrum, recover, rescale_beta, select_directions, solve_s_alpha, truncate_pairs,
};
use gsvdnmf::svd::truncated_svd;
use proptest::prelude::*;
use rand::Rng;

/// Direct evaluation of the full objective
/// `||x - sum_p alpha_p w_p h_p - s y||^2`.
fn eval_full(
    x: &DenseMatrix,
    f: &NmfFactors,
    y: &DenseMatrix,
    s: &DenseMatrix,
    alpha: &[f64],
) -> f64 {
    let mut w_scaled = f.w.clone();
    for (p, &a) in alpha.iter().enumerate() {
        w_scaled.scale_col(p, a);
    }
    let mut residual = x.sub(&w_scaled.mul(&f.h));
    if y.rows() > 0 {
        residual = residual.sub(&s.mul(y));
    }
    residual.fro_norm_sq()
}

#[test]
fn spectrum_matches_pencil_oracle_on_undercomplete_synthetic() {
    let (x, _) = gen_synthetic(10, 200, 300, 0.0, 420).unwrap();
    let init = init_nndsvd(&x, 9, NndsvdVariant::Plain, 0).unwrap();
    let run = run_hals(
        &x,
        init,
        SolverSettings {
            epsilon: 1e-4,
            ..Default::default()
        },
    )
    .unwrap();
    let svd = truncated_svd(&x, 9).unwrap();
    let (spectrum, _) = lambda_spectrum(&svd, &run.factors).unwrap();

    // Oracle: eigensolve the pencil built from the same projected operand.
    let a = svd.u.tr_mul(&run.factors.w).mul(&run.factors.h.mul(&svd.v));
    let finite = spectrum.finite_values();
    let oracle = pencil_lambdas_rank_aware(&svd.sigma, &a, finite.len());
    assert_eq!(spectrum.infinite_count() + finite.len(), 9);
    for (got, want) in finite.iter().zip(&oracle) {
        assert!(
            (got - want).abs() <= 1e-6 * want.abs(),
            "lambda {got} vs {want}"
        );
    }

    // One direction dominates: the under-complete fit is missing a single
    // component, and the spectrum says so.
    let mut sorted = finite.clone();
    sorted.sort_by(|p, q| q.partial_cmp(p).unwrap());
    let median = sorted[sorted.len() / 2];
    assert!(
        sorted[0] / median > 10.0,
        "top lambda {} vs median {median}",
        sorted[0]
    );
}

#[test]
fn reduced_quadratic_matches_dense_block_form() {
    let mut r = rng(41);
    for trial in 0..20u64 {
        let m = 4 + (trial % 4) as usize;
        let n = 5 + (trial % 3) as usize;
        let r0 = 2 + (trial % 3) as usize;
        let k = 1 + (trial % 2) as usize;
        let x = random_nonneg(&mut r, m, n);
        let f = init_random(&x, r0, trial).unwrap();
        let mut y = random_matrix(&mut r, k, n, -1.0, 1.0);
        for row in 0..k {
            let nrm = (y.row(row).iter().map(|v| v * v).sum::<f64>()).sqrt();
            for j in 0..n {
                y[(row, j)] /= nrm;
            }
        }
        let cand = solve_s_alpha(&x, &f, &y).unwrap();
        let q = &cand.quadratic;

        // Dense block matrices straight from their definitions.
        let mk = m * k;
        let mut psi = DenseMatrix::zeros(mk, mk);
        for p in 0..k {
            for q2 in 0..k {
                let yy: f64 = y.row(p).iter().zip(y.row(q2)).map(|(a, b)| a * b).sum();
                for i in 0..m {
                    psi[(p * m + i, q2 * m + i)] = yy;
                }
            }
        }
        let mut p_mat = DenseMatrix::zeros(r0, mk);
        for p in 0..r0 {
            for p2 in 0..k {
                let hy: f64 = f.h.row(p).iter().zip(y.row(p2)).map(|(a, b)| a * b).sum();
                for i in 0..m {
                    p_mat[(p, p2 * m + i)] = hy * f.w[(i, p)];
                }
            }
        }
        let gamma_vec: Vec<f64> = {
            let xy = x.mul_tr(&y);
            let mut g = vec![0.0; mk];
            for p in 0..k {
                for i in 0..m {
                    g[p * m + i] = xy[(i, p)];
                }
            }
            g
        };
        let psi_inv = gauss_jordan_inverse(&psi).expect("psi invertible");

        // Structure: the library's small Gram pieces agree with the dense
        // blocks entry for entry.
        for p in 0..k {
            for q2 in 0..k {
                assert!((psi[(p * m, q2 * m)] - q.y_gram[(p, q2)]).abs() < 1e-14);
            }
        }
        let wtw = f.w.tr_mul(&f.w);
        let hht = f.h.mul_tr(&f.h);
        for i in 0..r0 {
            for j in 0..r0 {
                assert!((q.theta[(i, j)] - wtw[(i, j)] * hht[(i, j)]).abs() < 1e-12);
            }
        }

        // Identity: reduced objective at random feasible alpha equals the
        // full quadratic at the stationary companion columns.
        for probe in 0..10 {
            let alpha: Vec<f64> = (0..r0).map(|_| r.random::<f64>() * 2.0).collect();
            let _ = probe;
            // m(alpha) = psi^{-1} (gamma - P^T alpha), dense route.
            let pt_alpha = p_mat.tr_mul_vec(&alpha);
            let rhs: Vec<f64> = gamma_vec
                .iter()
                .zip(&pt_alpha)
                .map(|(g, pa)| g - pa)
                .collect();
            let m_vec = psi_inv.mul_vec(&rhs);
            let mut s = DenseMatrix::zeros(m, k);
            for p in 0..k {
                for i in 0..m {
                    s[(i, p)] = m_vec[p * m + i];
                }
            }
            let full = eval_full(&x, &f, &y, &s, &alpha);
            let reduced = q.eval_reduced(&alpha);
            assert!(
                (full - reduced).abs() <= 1e-8 * full.abs().max(1.0),
                "trial {trial}: full {full} vs reduced {reduced}"
            );
        }

        // The reduced quadratic matrix is positive semidefinite.
        let (eigs, _) = jacobi_eigh(&q.reduced_quadratic);
        let trace: f64 = (0..r0).map(|i| q.reduced_quadratic[(i, i)]).sum();
        assert!(
            eigs[eigs.len() - 1] >= -1e-8 * trace,
            "trial {trial}: min eig {} trace {trace}",
            eigs[eigs.len() - 1]
        );
    }
}

#[test]
fn companion_solve_beats_random_probes() {
    let mut r = rng(42);
    let x = random_nonneg(&mut r, 5, 6);
    let f = init_random(&x, 2, 9).unwrap();
    let svd = truncated_svd(&x, 2).unwrap();
    let (spectrum, dirs) = lambda_spectrum(&svd, &f).unwrap();
    let y = select_directions(&spectrum, &dirs, 1).unwrap();
    let cand = solve_s_alpha(&x, &f, &y).unwrap();

    let best = eval_full(&x, &f, &y, &cand.s, &cand.alpha);
    let reduced = cand.quadratic.eval_reduced(&cand.alpha);
    assert!(
        (best - reduced).abs() <= 1e-8 * best.max(1.0),
        "direct {best} vs reduced {reduced}"
    );

    for _ in 0..1000 {
        let alpha: Vec<f64> = cand
            .alpha
            .iter()
            .map(|&a| (a + 0.2 * (r.random::<f64>() - 0.5)).max(0.0))
            .collect();
        let s = DenseMatrix::from_fn(5, 1, |i, j| {
            cand.s[(i, j)] + 0.2 * (r.random::<f64>() - 0.5)
        });
        let probed = eval_full(&x, &f, &y, &s, &alpha);
        assert!(
            probed >= best - 1e-9 * best.max(1.0),
            "probe {probed} beat solution {best}"
        );
    }
}

#[test]
fn truncation_picks_the_better_sign_candidate() {
    let mut r = rng(43);
    for _ in 0..50 {
        let s = random_matrix(&mut r, 6, 1, -1.0, 1.0);
        let y = random_matrix(&mut r, 1, 7, -1.0, 1.0);
        let (w, h, _) = truncate_pairs(&s, &y);

        let outer = s.mul(&y);
        let got = outer.sub(&w.mul(&h)).fro_norm();

        // Both sign-restricted rank-one candidates, evaluated directly.
        let mut best = f64::INFINITY;
        for sign in [1.0, -1.0] {
            let sp = DenseMatrix::from_fn(6, 1, |i, j| (sign * s[(i, j)]).max(0.0));
            let yp = DenseMatrix::from_fn(1, 7, |i, j| (sign * y[(i, j)]).max(0.0));
            let err = outer.sub(&sp.mul(&yp)).fro_norm();
            if err < best {
                best = err;
            }
        }
        assert!(
            got <= best + 1e-10,
            "truncation error {got} vs best candidate {best}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn truncation_never_exceeds_input_mass(seed in 0u64..500) {
        let mut r = rng(seed.wrapping_add(44));
        let m = 3 + (seed % 5) as usize;
        let n = 2 + (seed % 6) as usize;
        let k = 1 + (seed % 2) as usize;
        let s = random_matrix(&mut r, m, k, -1.0, 1.0);
        let y = random_matrix(&mut r, k, n, -1.0, 1.0);
        let (w, h, _) = truncate_pairs(&s, &y);
        prop_assert!(w.is_nonnegative());
        prop_assert!(h.is_nonnegative());
        // Component-wise contraction.
        for j in 0..k {
            let sj = DenseMatrix::from_fn(m, 1, |i, _| s[(i, j)]);
            let yj = DenseMatrix::from_fn(1, n, |_, i| y[(j, i)]);
            let wj = DenseMatrix::from_fn(m, 1, |i, _| w[(i, j)]);
            let hj = DenseMatrix::from_fn(1, n, |_, i| h[(j, i)]);
            let outer = sj.mul(&yj);
            prop_assert!(outer.sub(&wj.mul(&hj)).fro_norm() <= outer.fro_norm() + 1e-12);
        }
    }
}

#[test]
fn augmentation_does_not_hurt_the_refinement_start() {
    let mut r = rng(45);
    let x = random_nonneg(&mut r, 12, 15);
    let init = init_random(&x, 3, 17).unwrap();
    let run = run_hals(
        &x,
        init,
        SolverSettings {
            epsilon: 1e-5,
            max_iters: 2_000,
            seed: 0,
        },
    )
    .unwrap();
    let svd = truncated_svd(&x, 3).unwrap();
    let aug = recover(&x, &run.factors, &svd, 2).unwrap();
    assert!(aug.w_g.is_nonnegative() && aug.h_g.is_nonnegative());
    assert!(aug.rank() <= 5);

    let before = naive_objective(&x, &run.factors.w, &run.factors.h);
    let after = naive_objective(&x, &aug.w_g, &aug.h_g);
    assert!(
        after <= before + 1e-9 * before,
        "augmented {after} vs zero-padded original {before}"
    );
}

#[test]
fn overrank_svd_guarantees_infinite_directions() {
    let mut r = rng(46);
    for trial in 0..10u64 {
        let m = 10 + (trial % 3) as usize;
        let n = 11 + (trial % 4) as usize;
        let x = random_nonneg(&mut r, m, n);
        let r0 = 2 + (trial % 3) as usize;
        let k = 1 + (trial % 2) as usize;
        let f = init_random(&x, r0, trial).unwrap();
        let svd = truncated_svd(&x, r0 + k).unwrap();
        let (spectrum, _) = lambda_spectrum(&svd, &f).unwrap();
        assert!(
            spectrum.infinite_count() >= k,
            "trial {trial}: {} infinite values for k = {k}",
            spectrum.infinite_count()
        );
        // And the infinite directions are selected first.
        assert!(spectrum.values[spectrum.order[0]].is_infinite());
    }
}

#[test]
fn recovered_factors_are_exactly_nonnegative() {
    let mut r = rng(47);
    for trial in 0..5u64 {
        let x = random_nonneg(&mut r, 9, 11);
        let f = init_random(&x, 3, trial).unwrap();
        let run = run_hals(
            &x,
            f,
            SolverSettings {
                epsilon: 1e-4,
                max_iters: 1_000,
                seed: 0,
            },
        )
        .unwrap();
        let svd = truncated_svd(&x, 3).unwrap();
        let aug = recover(&x, &run.factors, &svd, 1).unwrap();
        assert!(aug.w_g.min_entry() >= 0.0);
        assert!(aug.h_g.min_entry() >= 0.0);
    }
}

#[test]
fn exact_factorization_has_unit_spectrum() {
    // When w0 h0 reproduces x exactly at the SVD rank, the projected operand
    // equals Sigma and every generalized singular value is 1.
    let w = DenseMatrix::from_vec(5, 2, vec![1.0, 0.2, 0.4, 1.1, 0.9, 0.3, 0.1, 0.8, 0.6, 0.5])
        .unwrap();
    let h = DenseMatrix::from_vec(2, 6, vec![
        0.7, 0.1, 0.9, 0.4, 0.2, 0.6, 0.3, 1.0, 0.2, 0.8, 0.5, 0.1,
    ])
    .unwrap();
    let f = NmfFactors::new(w, h).unwrap();
    let x = f.product();
    let svd = truncated_svd(&x, 2).unwrap();
    let (spectrum, _) = lambda_spectrum(&svd, &f).unwrap();
    assert_eq!(spectrum.infinite_count(), 0);
    for v in &spectrum.values {
        assert!((v - 1.0).abs() < 1e-8, "lambda {v}");
    }
}

#[test]
fn rescale_beta_matches_active_set_enumeration() {
    // Small enough for the exhaustive oracle: r0 + k = 5 <= 6 components.
    let mut r = rng(48);
    let x = random_nonneg(&mut r, 4, 5);
    let w = random_nonneg(&mut r, 4, 5);
    let h = random_nonneg(&mut r, 5, 5);
    let beta = rescale_beta(&x, &w, &h).unwrap();

    // Rebuild the vec(w_p h_p) design and compare objectives.
    let design = DenseMatrix::from_fn(20, 5, |row, p| {
        let (i, j) = (row / 5, row % 5);
        w[(i, p)] * h[(p, j)]
    });
    let target: Vec<f64> = (0..20).map(|row| x[(row / 5, row % 5)]).collect();
    let got = nnls_objective(&design, &target, &beta);
    let (_, best) = brute_force_nnls(&design, &target);
    assert!(
        (got - best).abs() <= 1e-8 * best.max(1.0),
        "objective {got} vs enumeration {best}"
    );
}
