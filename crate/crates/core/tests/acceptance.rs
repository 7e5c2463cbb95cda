//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion does.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use repalign::embedding::{encode_embedding_set, load_embedding_set, save_embedding_set, Dtype, EmbeddingSet, SetMeta};
use repalign::evaluation::{evaluate_aligner, AlignParams, Method};
use repalign::inn::{
    fit_inn, grad_check, random_inn, random_inn_with, read_inn, write_inn, InnModel, RandomInnSpec, Real, TrainConfig,
};
use repalign::linear::{fit_cca, pwcca, similarity_index, IndexKind, IndexParams};
use repalign::numerics::Matrix;
use repalign::synth::gaussian_matrix;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_repalign")
}

fn randn(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn repalign(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin())
        .args(args)
        .env_remove("REPALIGN_LOG")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "repalign {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn a1_synthetic_recovery() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("s1");
    let out_s = out.to_str().unwrap();
    let start = Instant::now();
    repalign(&[
        "synth", "--dim", "64", "--n", "2000", "--gt-layers", "4", "--methods", "all", "--seed", "1", "--out", out_s,
    ])?;
    let secs = start.elapsed().as_secs_f64();
    let report: Value = serde_json::from_slice(&fs::read(out.join("report.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut rel = BTreeMap::new();
    for r in report["reports"].as_array().ok_or("no reports")? {
        rel.insert(r["method"].as_str().unwrap().to_string(), r["test_rel"].as_f64().unwrap());
    }
    let get = |m: &str| rel.get(m).copied().unwrap_or(f64::NAN);
    let inn = get("inn");
    let best_linear = ["linreg", "cca", "svcca"].iter().map(|m| get(m)).fold(f64::INFINITY, f64::min);
    let mut order: Vec<_> = rel.iter().collect();
    order.sort_by(|a, b| a.1.total_cmp(b.1));
    let order: Vec<String> = order.iter().map(|(m, v)| format!("{m} {v:.4}")).collect();
    let ratio = inn / best_linear;
    check(
        inn < 0.02 && ratio < 0.25 && secs < 600.0,
        format!(
            "INN test rel {inn:.5} (< 0.02), ratio to best of linreg/cca/svcca {ratio:.3} (< 0.25), {secs:.0}s; test rel ascending: {}",
            order.join(" < ")
        ),
    )
}

fn max_abs_diff<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p.to_f64() - q.to_f64()).abs()).fold(0.0, f64::max)
}

fn roundtrip_error<T: Real>(model: &InnModel<T>, points: &Matrix) -> Result<f64, String> {
    let x: DMatrix<T> = points.map(T::of);
    let back = model.inverse(&model.forward(&x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(max_abs_diff(&x, &back))
}

fn a2_bijectivity() -> Outcome {
    let n = 10_000;
    let mut worst32 = 0.0f64;
    let mut worst64 = 0.0f64;
    let mut models = 0;
    for (ki, &k) in [8usize, 64, 768].iter().enumerate() {
        let points = gaussian_matrix(n, k, 100 + ki as u64);
        for s in 0..5u64 {
            let spec = RandomInnSpec {
                width: if k == 768 { 128 } else { 64 },
                ..RandomInnSpec::default()
            };
            let m64 = random_inn_with::<f64>(k, 2 + s as usize, 10 * ki as u64 + s, &spec).map_err(|e| e.to_string())?;
            worst64 = worst64.max(roundtrip_error(&m64, &points)?);
            worst32 = worst32.max(roundtrip_error(&m64.cast::<f32>(), &points)?);
            models += 1;
        }
        let rounds = if k == 768 { 1 } else { 2 };
        for s in 0..rounds {
            let x = gaussian_matrix(600, k, 200 + s);
            let target = random_inn::<f64>(k, 2, 300 + s).map_err(|e| e.to_string())?;
            let y = target.forward(&x).map_err(|e| e.to_string())?;
            let cfg = TrainConfig {
                layers: 4,
                width: 64,
                max_epochs: 3,
                patience: 3,
                learning_rate: 1e-2,
                seed: s,
                ..TrainConfig::default()
            };
            let trained = fit_inn(&x, &y, &cfg).map_err(|e| e.to_string())?.model;
            worst32 = worst32.max(roundtrip_error(&trained, &points)?);
            worst64 = worst64.max(roundtrip_error(&trained.cast::<f64>(), &points)?);
            models += 1;
        }
    }
    check(
        models == 20 && worst32 < 1e-5 && worst64 < 1e-10,
        format!("{models} models x {n} points: max roundtrip error f32 {worst32:.2e} (< 1e-5), f64 {worst64:.2e} (< 1e-10)"),
    )
}

fn a3_gradients() -> Outcome {
    let spec = RandomInnSpec {
        width: 16,
        ..RandomInnSpec::default()
    };
    let mut worst_rel = 0.0f64;
    let mut worst_abs = 0.0f64;
    let mut params = 0;
    let mut passed = true;
    for seed in 0..3 {
        let model = random_inn_with::<f64>(8, 2, seed, &spec).map_err(|e| e.to_string())?;
        let r = grad_check(&model, 16, seed, 1e-4).map_err(|e| e.to_string())?;
        worst_rel = worst_rel.max(r.max_rel_err);
        worst_abs = worst_abs.max(r.max_abs_err);
        params = r.n_params;
        passed &= r.passed;
    }
    check(
        passed && worst_rel < 1e-4,
        format!("K=8, L=2, width 16, {params} parameters, 3 models: max rel err {worst_rel:.2e} (< 1e-4), max abs err {worst_abs:.2e}"),
    )
}

fn rho_sq_oracle_2x2(x: &Matrix, y: &Matrix) -> [f64; 2] {
    let n = x.nrows() as f64;
    let mean = |m: &Matrix, j: usize| m.column(j).sum() / n;
    let cov = |a: &Matrix, i: usize, b: &Matrix, j: usize| {
        let (ma, mb) = (mean(a, i), mean(b, j));
        (0..a.nrows()).map(|r| (a[(r, i)] - ma) * (b[(r, j)] - mb)).sum::<f64>() / (n - 1.0)
    };
    let block = |a: &Matrix, b: &Matrix| Matrix2::new(cov(a, 0, b, 0), cov(a, 0, b, 1), cov(a, 1, b, 0), cov(a, 1, b, 1));
    let inv2 = |m: Matrix2<f64>| {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
    };
    let sxy = block(x, y);
    let m = inv2(block(x, x)) * sxy * inv2(block(y, y)) * sxy.transpose();
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 + disc, tr / 2.0 - disc]
}

fn a4_cca() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut self_err = 0.0f64;
    let mut invariance_err = 0.0f64;
    for _ in 0..10 {
        let d = rng.random_range(2..12);
        let x = randn(300, d, &mut rng);
        let m = fit_cca(&x, &x, d).map_err(|e| e.to_string())?;
        self_err = self_err.max(m.rho.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max));

        let dy = rng.random_range(2..10);
        let y = &x.columns(0, d.min(dy)).clone_owned() * randn(d.min(dy), dy, &mut rng) + randn(300, dy, &mut rng);
        let c = d.min(dy);
        let base = fit_cca(&x, &y, c).map_err(|e| e.to_string())?;
        let reparam = randn(d, d, &mut rng) + Matrix::identity(d, d) * 2.0;
        let moved = fit_cca(&(&x * reparam), &y, c).map_err(|e| e.to_string())?;
        let diff = base.rho.iter().zip(&moved.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        invariance_err = invariance_err.max(diff);
    }
    let mut oracle_err = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(20..200);
        let x = randn(n, 2, &mut rng);
        let mix = randn(2, 2, &mut rng) * rng.random_range(0.0..2.0);
        let y = &x * mix + randn(n, 2, &mut rng);
        let model = fit_cca(&x, &y, 2).map_err(|e| e.to_string())?;
        let want = rho_sq_oracle_2x2(&x, &y);
        for (r, w) in model.rho.iter().zip(want) {
            oracle_err = oracle_err.max((r * r - w.clamp(0.0, 1.0)).abs());
        }
    }
    check(
        self_err < 1e-8 && invariance_err < 1e-6 && oracle_err < 1e-8,
        format!(
            "|rho(X,X) - 1| {self_err:.1e} (< 1e-8), reparameterisation drift {invariance_err:.1e} (< 1e-6), 2x2 oracle error on 100 instances {oracle_err:.1e} (< 1e-8)"
        ),
    )
}

/// `Y = X A + b` with a well-conditioned, orientation-preserving `A` near the
/// identity.
fn linear_instance(n: usize, d: usize, seed: u64) -> (Matrix, Matrix) {
    let x = gaussian_matrix(n, d, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Matrix::identity(d, d) + randn(d, d, &mut rng) * (0.3 / (d as f64).sqrt());
    if a.determinant() < 0.0 {
        a.column_mut(0).neg_mut();
    }
    let b = nalgebra::RowDVector::from_fn(d, |_, j| (0.1 * j as f64).sin());
    let mut y = &x * a;
    for mut row in y.row_iter_mut() {
        row += &b;
    }
    (x, y)
}

fn a5_linear_ground_truth() -> Outcome {
    let (x, y) = linear_instance(2000, 8, 5);
    let (tr, te) = repalign::embedding::split_indices(2000, 0.5, 5).map_err(|e| e.to_string())?;
    let (xtr, ytr, xte, yte) = (x.select_rows(&tr), y.select_rows(&tr), x.select_rows(&te), y.select_rows(&te));
    let params = AlignParams::default();
    let mut rel = BTreeMap::new();
    for m in [Method::Linreg, Method::Cca, Method::Inn] {
        let r = evaluate_aligner(m, &xtr, &ytr, &xte, &yte, &params).map_err(|e| e.to_string())?;
        rel.insert(m.name(), r.test_rel);
    }
    let (lr, cca, inn) = (rel["linreg"], rel["cca"], rel["inn"]);
    check(
        lr < 1e-6 && cca < 1e-6 && inn < 1e-2,
        format!("2000x8, A = I + 0.3 G / sqrt(8): test rel linreg {lr:.1e}, cca {cca:.1e} (< 1e-6), inn {inn:.4} (< 1e-2)"),
    )
}

fn a6_svcca_noise() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (n, d, extra) = (1000, 8, 8);
    let x = randn(n, d, &mut rng);
    let y = &x * (randn(d, d, &mut rng) + Matrix::identity(d, d) * 2.0);
    let noise = randn(n, extra, &mut rng) * 1e-3;
    let mut noisy = Matrix::zeros(n, d + extra);
    noisy.columns_mut(0, d).copy_from(&x);
    noisy.columns_mut(d, extra).copy_from(&noise);
    let p = IndexParams::default();
    let idx = |a: &Matrix, k| similarity_index(a, &y, k, &p).map_err(|e| e.to_string());
    let sv = (idx(&x, IndexKind::Svcca)?, idx(&noisy, IndexKind::Svcca)?);
    let cc = (idx(&x, IndexKind::Cca)?, idx(&noisy, IndexKind::Cca)?);
    let (dsv, dcc) = ((sv.0 - sv.1).abs(), (cc.0 - cc.1).abs());
    check(
        dsv < 0.05 && dcc > 0.2,
        format!(
            "{extra} noise dims (std 1e-3) on {d}: svcca {:.4} -> {:.4} (change {dsv:.4} < 0.05), cca {:.4} -> {:.4} (change {dcc:.4} > 0.2)",
            sv.0, sv.1, cc.0, cc.1
        ),
    )
}

fn a7_index_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = IndexParams::default();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut self_err = 0.0f64;
    let mut pwcca_ok = true;
    for _ in 0..30 {
        let n = rng.random_range(40..200);
        let (dx, dy) = (rng.random_range(2..10), rng.random_range(2..10));
        let x = randn(n, dx, &mut rng);
        let shared = dx.min(dy);
        let y = &x.columns(0, shared).clone_owned() * randn(shared, dy, &mut rng)
            + randn(n, dy, &mut rng) * rng.random_range(0.0..3.0);
        for kind in IndexKind::ALL {
            let v = similarity_index(&x, &y, kind, &p).map_err(|e| e.to_string())?;
            lo = lo.min(v);
            hi = hi.max(v);
            let s = similarity_index(&x, &x, kind, &p).map_err(|e| e.to_string())?;
            self_err = self_err.max((s - 1.0).abs());
        }
        let model = fit_cca(&x, &y, shared).map_err(|e| e.to_string())?;
        let score = pwcca(&model, &x).map_err(|e| e.to_string())?.score;
        let rmin = model.rho.iter().copied().fold(f64::INFINITY, f64::min);
        let rmax = model.rho.iter().copied().fold(0.0, f64::max);
        pwcca_ok &= score >= rmin - 1e-12 && score <= rmax + 1e-12;
    }
    check(
        lo >= 0.0 && hi <= 1.0 + 1e-8 && self_err < 1e-8 && pwcca_ok,
        format!(
            "30 instances x 4 indices in [{lo:.4}, {hi:.4}], max |self - 1| {self_err:.1e}, pwcca within [min rho, max rho]: {pwcca_ok}"
        ),
    )
}

fn quantiles_ordered(csv: &str) -> Result<usize, String> {
    let mut rows = 0;
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().map_err(|_| line.to_string())).collect::<Result<_, _>>()?;
        let [min, q1, med, q3, max] = [f[0], f[1], f[2], f[3], f[4]];
        if !(min <= q1 && q1 <= med && med <= q3 && q3 <= max) {
            return Err(format!("quantiles out of order: {line}"));
        }
        rows += 1;
    }
    Ok(rows)
}

fn a8_pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sets = dir.path().join("sets");
    let sets_s = sets.to_str().unwrap();
    repalign(&["synth", "--models", "5", "--layers", "4", "--n", "400", "--dim", "16", "--seed", "8", "--out", sets_s])?;
    let mut outputs = Vec::new();
    for run in ["r1", "r2"] {
        let out = dir.path().join(run);
        repalign(&["analyze", "--inputs", sets_s, "--method", "linreg", "--seed", "8", "--out", out.to_str().unwrap()])?;
        outputs.push(out);
    }
    let read = |d: &Path, f: &str| fs::read(d.join(f)).map_err(|e| format!("{f}: {e}"));
    let mut identical = true;
    for f in ["analysis.csv", "layer_stats.csv"] {
        identical &= read(&outputs[0], f)? == read(&outputs[1], f)?;
    }
    let pairs = String::from_utf8(read(&outputs[0], "analysis.csv")?).map_err(|e| e.to_string())?;
    let mut per_layer = BTreeMap::new();
    for line in pairs.lines().filter(|l| !l.starts_with('#')).skip(1) {
        *per_layer.entry(line.split(',').next().unwrap().to_string()).or_insert(0) += 1;
    }
    let stats = String::from_utf8(read(&outputs[0], "layer_stats.csv")?).map_err(|e| e.to_string())?;
    let layers = quantiles_ordered(&stats)?;
    let ten_each = per_layer.len() == 4 && per_layer.values().all(|&c| c == 10);
    check(
        identical && ten_each && layers == 4,
        format!("20 sets, pairs per layer {per_layer:?}, CSV byte-identical across runs: {identical}, quantiles ordered on {layers} layers"),
    )
}

fn a9_format_fidelity() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 64,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("p.emb");
    let emb = (1usize..40, 1usize..24, any::<bool>(), any::<u64>());
    runner
        .run(&emb, |(n, d, single, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = Matrix::from_fn(n, d, |_, _| rng.random_range(-1e3..1e3));
            let meta = SetMeta::new("prop", seed % 1000, (seed % 24) as u32 + 1, "prop-data");
            let set = if single {
                EmbeddingSet::new_f32(data, meta).unwrap()
            } else {
                EmbeddingSet::new(data, meta).unwrap()
            };
            save_embedding_set(&set, &path).unwrap();
            let back = load_embedding_set(&path).unwrap();
            prop_assert_eq!(back.dtype(), if single { Dtype::F32 } else { Dtype::F64 });
            prop_assert_eq!(&back, &set);
            prop_assert_eq!(encode_embedding_set(&back).0, fs::read(&path).unwrap());
            Ok(())
        })
        .map_err(|e| format!("EMB1: {e}"))?;
    let inn = (2usize..12, 1usize..5, any::<bool>(), any::<u64>());
    runner
        .run(&inn, |(dim, layers, single, seed)| {
            let m = random_inn::<f64>(dim, layers, seed).unwrap();
            if single {
                let m = m.cast::<f32>();
                let bytes = write_inn(&m);
                let back = read_inn::<f32>(&bytes).unwrap();
                prop_assert_eq!(write_inn(&back), bytes);
                prop_assert_eq!(back, m);
            } else {
                let bytes = write_inn(&m);
                let back = read_inn::<f64>(&bytes).unwrap();
                prop_assert_eq!(write_inn(&back), bytes);
                prop_assert_eq!(back, m);
            }
            Ok(())
        })
        .map_err(|e| format!("INN1: {e}"))?;
    Ok("EMB1 and INN1 bit-exact over 64 random shapes each, both dtypes".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("A1 synthetic recovery", a1_synthetic_recovery),
        ("A2 bijectivity", a2_bijectivity),
        ("A3 gradient correctness", a3_gradients),
        ("A4 CCA correctness", a4_cca),
        ("A5 linear ground truth", a5_linear_ground_truth),
        ("A6 SVCCA noise robustness", a6_svcca_noise),
        ("A7 similarity index bounds", a7_index_bounds),
        ("A8 pipeline determinism", a8_pipeline_determinism),
        ("A9 format fidelity", a9_format_fidelity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
