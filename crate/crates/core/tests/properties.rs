use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use repalign::analysis::{analyze_collection, export_report, import_report, ExportFormat, PairOptions};
use repalign::embedding::{mean_pool, split_indices, TokenEmbeddings};
use repalign::evaluation::{set_distance, AlignParams, Method};
use repalign::inn::{fit_inn, random_inn, write_inn, TrainConfig};
use repalign::linear::{apply_linear, fit_cca, fit_linreg, pwcca, similarity_index, IndexKind, IndexParams};
use repalign::numerics::{least_squares, orthonormal_basis, svd, Matrix};
use repalign::synth::synthetic_collection;

fn randn(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
}

/// Random matrix with condition number below 100.
fn well_conditioned(d: usize, seed: u64) -> Matrix {
    let q1 = randn(d, d, seed).qr().q();
    let q2 = randn(d, d, seed ^ 0x55).qr().q();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Matrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| rng.random_range(0.2..10.0)));
    q1 * s * q2
}

fn sse(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm_squared()
}

#[test]
fn svd_reconstructs_512_square() {
    let m = randn(512, 512, 1);
    let dec = svd(&m).unwrap();
    assert!((dec.reconstruct() - &m).norm() / m.norm() < 1e-10);
}

#[test]
fn cca_variates_are_orthogonal() {
    let x = randn(300, 6, 2);
    let y = &x * randn(6, 5, 3) + randn(300, 5, 4);
    let m = fit_cca(&x, &y, 5).unwrap();
    let center = |a: &Matrix| {
        let mean = a.row_mean();
        let mut c = a.clone();
        for mut r in c.row_iter_mut() {
            r -= &mean;
        }
        c
    };
    for (data, w) in [(center(&x), &m.w_x), (center(&y), &m.w_y)] {
        let v = data * w;
        for i in 0..5 {
            for j in 0..i {
                let dot = v.column(i).dot(&v.column(j)).abs();
                assert!(dot < 1e-6 * v.column(i).norm() * v.column(j).norm(), "{i} {j} {dot}");
            }
        }
    }
}

#[test]
fn rel_distance_reweights_by_target_norm() {
    let a = randn(20, 4, 5);
    let b = randn(20, 4, 6) * 3.0;
    let mean_norm = |m: &Matrix| m.row_iter().map(|r| r.norm()).sum::<f64>() / m.nrows() as f64;
    let ab = set_distance(&a, &b).unwrap();
    let ba = set_distance(&b, &a).unwrap();
    assert_eq!(ab.raw, ba.raw);
    assert!((ab.rel * mean_norm(&b) - ba.rel * mean_norm(&a)).abs() < 1e-10);
}

#[test]
fn linreg_rel_is_invariant_to_target_scale() {
    let x = randn(100, 5, 7);
    let y = (&x * randn(5, 4, 8)).map(f64::sin);
    let rel = |y: &Matrix| set_distance(&apply_linear(&fit_linreg(&x, y).unwrap(), &x).unwrap(), y).unwrap().rel;
    assert!((rel(&y) - rel(&(&y * 7.5))).abs() < 1e-10);
}

#[test]
fn training_is_deterministic_and_best_loss_non_increasing() {
    let x = randn(200, 6, 9);
    let y = random_inn::<f64>(6, 2, 10).unwrap().forward(&x).unwrap();
    let cfg = TrainConfig {
        layers: 2,
        width: 16,
        max_epochs: 8,
        patience: 8,
        batch_size: 32,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = fit_inn(&x, &y, &cfg).unwrap();
    let b = fit_inn(&x, &y, &cfg).unwrap();
    assert_eq!(write_inn(&a.model), write_inn(&b.model));
    assert!(a.history.windows(2).all(|w| w[1].best_val_loss <= w[0].best_val_loss));
}

#[test]
fn analysis_reruns_are_identical_and_export_roundtrips() {
    let sets = synthetic_collection(3, 2, 120, 6, 11).unwrap();
    let opts = PairOptions::default();
    let params = AlignParams::default();
    let a = analyze_collection(&sets, Method::Linreg, &params, &opts).unwrap();
    let b = analyze_collection(&sets, Method::Linreg, &params, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.pairs.iter().all(|p| p.raw.is_finite() && p.raw >= 0.0 && p.rel >= 0.0));
    let dir = tempfile::tempdir().unwrap();
    let files = export_report(&a, dir.path(), ExportFormat::Json).unwrap();
    assert_eq!(import_report(&files[0]).unwrap(), a);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn svd_reconstruction(n in 1usize..40, d in 1usize..40, seed in any::<u64>()) {
        let m = randn(n, d, seed);
        let dec = svd(&m).unwrap();
        prop_assert!((dec.reconstruct() - &m).norm() / m.norm() < 1e-10);
        prop_assert!(dec.s.iter().zip(dec.s.iter().skip(1)).all(|(a, b)| a >= b));
    }

    #[test]
    fn least_squares_satisfies_normal_equations(n in 5usize..40, d in 1usize..6, k in 1usize..4, seed in any::<u64>()) {
        let a = randn(n, d, seed);
        let b = randn(n, k, seed.wrapping_add(1));
        let w = least_squares(&a, &b).unwrap();
        let atb = a.transpose() * &b;
        prop_assert!((a.transpose() * &a * &w - &atb).norm() < 1e-8 * atb.norm().max(1e-300));
    }

    #[test]
    fn orthonormal_basis_is_orthonormal(n in 2usize..30, d in 1usize..10, seed in any::<u64>()) {
        let q = orthonormal_basis(&randn(n, d, seed)).unwrap();
        let k = q.ncols();
        prop_assert!((q.transpose() * &q - Matrix::identity(k, k)).amax() < 1e-12);
    }

    #[test]
    fn mean_pool_ignores_token_order(k in 1usize..20, d in 1usize..8, seed in any::<u64>()) {
        let t = randn(k, d, seed);
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = mean_pool(&TokenEmbeddings::new(t.clone()).unwrap());
        let b = mean_pool(&TokenEmbeddings::new(t.select_rows(&order)).unwrap());
        prop_assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn split_is_a_pure_partition(n in 2usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
        if let Ok((tr, te)) = split_indices(n, frac, seed) {
            prop_assert_eq!(split_indices(n, frac, seed).unwrap(), (tr.clone(), te.clone()));
            let mut all: Vec<usize> = tr.into_iter().chain(te).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn cca_rho_invariant_under_reparameterisation(d in 2usize..7, seed in any::<u64>()) {
        let x = randn(200, d, seed);
        let y = &x * randn(d, d, seed ^ 1) + randn(200, d, seed ^ 2);
        let base = fit_cca(&x, &y, d).unwrap();
        let moved = fit_cca(&(&x * well_conditioned(d, seed ^ 3)), &y, d).unwrap();
        for (a, b) in base.rho.iter().zip(&moved.rho) {
            prop_assert!((a - b).abs() < 1e-6);
        }
        prop_assert!(base.rho[0] <= 1.0 + 1e-8);
        prop_assert!(base.rho.windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
    }

    #[test]
    fn linreg_is_a_training_loss_minimum(d in 1usize..6, k in 1usize..5, seed in any::<u64>()) {
        let x = randn(60, d, seed);
        let y = randn(60, k, seed ^ 9);
        let map = fit_linreg(&x, &y).unwrap();
        let best = sse(&apply_linear(&map, &x).unwrap(), &y);
        for i in 0..20 {
            let mut other = map.clone();
            other.w += randn(d, k, seed ^ (100 + i)) * 1e-3;
            prop_assert!(sse(&apply_linear(&other, &x).unwrap(), &y) >= best);
        }
    }

    #[test]
    fn pwcca_weights_and_score_bounds(d in 2usize..7, seed in any::<u64>()) {
        let x = randn(120, d, seed);
        let y = &x * randn(d, d, seed ^ 4) + randn(120, d, seed ^ 5) * 2.0;
        let m = fit_cca(&x, &y, d).unwrap();
        let p = pwcca(&m, &x).unwrap();
        prop_assert!(p.alpha.iter().all(|&a| a >= 0.0));
        let lo = m.rho.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = m.rho.iter().copied().fold(0.0, f64::max);
        prop_assert!(p.score >= lo - 1e-12 && p.score <= hi + 1e-12);
    }

    #[test]
    fn similarity_indices_are_bounded(dx in 1usize..8, dy in 1usize..8, noise in 0.0f64..3.0, seed in any::<u64>()) {
        let x = randn(80, dx, seed);
        let y = &x * randn(dx, dy, seed ^ 6) + randn(80, dy, seed ^ 7) * noise;
        let p = IndexParams::default();
        for kind in IndexKind::ALL {
            let v = similarity_index(&x, &y, kind, &p).unwrap();
            prop_assert!((0.0..=1.0 + 1e-8).contains(&v), "{kind} {v}");
            prop_assert!((similarity_index(&x, &x, kind, &p).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn svcca_ignores_small_noise_columns(d in 4usize..12, seed in any::<u64>()) {
        let x = randn(300, d, seed);
        let y = &x * well_conditioned(d, seed ^ 8);
        let extra = d / 2;
        let scale = 1e-4 * x.norm() / (300.0 * d as f64).sqrt();
        let mut noisy = Matrix::zeros(300, d + extra);
        noisy.columns_mut(0, d).copy_from(&x);
        noisy.columns_mut(d, extra).copy_from(&(randn(300, extra, seed ^ 9) * scale));
        let p = IndexParams::default();
        let before = similarity_index(&x, &y, IndexKind::Svcca, &p).unwrap();
        let after = similarity_index(&noisy, &y, IndexKind::Svcca, &p).unwrap();
        prop_assert!((before - after).abs() < 0.05);
    }

    #[test]
    fn inn_roundtrip_and_pass_through(dim in 2usize..24, layers in 1usize..7, seed in any::<u64>()) {
        let model = random_inn::<f64>(dim, layers, seed).unwrap();
        let x = DMatrix::from_fn(50, dim, |i, j| ((i * 31 + j * 7) as f64).sin() * 2.0);
        prop_assert!((model.inverse(&model.forward(&x).unwrap()).unwrap() - &x).amax() < 1e-10);
        let x32 = x.map(|v| v as f32);
        let m32 = model.cast::<f32>();
        prop_assert!((m32.inverse(&m32.forward(&x32).unwrap()).unwrap() - &x32).amax() < 1e-5);
        for layer in &model.layers {
            let (p, _) = layer.halves();
            let y = layer.forward(&x);
            prop_assert_eq!(y.columns(p, layer.split).into_owned(), x.columns(p, layer.split).into_owned());
        }
    }
}
