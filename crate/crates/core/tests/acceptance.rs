//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p gprank-core --test acceptance`. The end-to-end
//! criteria train on a freshly generated synthetic dataset and take a few
//! minutes on one core.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gprank_core::features::{ParamVector, FEATURE_DIM};
use gprank_core::gp::{self, GpHead};
use gprank_core::imaging::{gen_synthetic_dataset, SyntheticDatasetConfig};
use gprank_core::joint::{cluster_term, gradient_check, train_joint, JointConfig, TrainedModel};
use gprank_core::kernel::Hyperparams;
use gprank_core::pipeline::{
    load_model, load_training_set, model_from_json, model_to_json, run_synthetic_experiment, save_model,
    DatasetManifest, ExperimentConfig, ExperimentReport,
};
use gprank_core::ranking::{
    build_differences, dual_objective, kkt_violation, solve_box_qp, DifferenceSet, DualSolverOptions, RankModel,
};
use gprank_core::traversal::{gen_param_grid, TraversalConfig};
use gprank_core::{enhance, extract_features, Error, FeatureMatrix, RasterImage, StandardizationStats};

/// Seed of the end-to-end synthetic experiment.
const EXPERIMENT_SEED: u64 = 7;

/// Ranking box bound and cluster weight of the end-to-end experiment; see
/// the README for how they were chosen.
const EXPERIMENT_C: f64 = 0.01;
const EXPERIMENT_CLUSTER_WEIGHT: f64 = 10.0;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- oracles

fn se_oracle(a: &[f64], b: &[f64], h: &Hyperparams) -> f64 {
    let theta = h.theta();
    let mut q = 0.0;
    for d in 0..a.len() {
        q += theta[d] * (a[d] - b[d]) * (a[d] - b[d]);
    }
    h.sigma_f2() * (-0.5 * q).exp()
}

fn dense_gram(x: &FeatureMatrix, h: &Hyperparams, noise: bool) -> DMatrix<f64> {
    let n = x.rows();
    DMatrix::from_fn(n, n, |i, j| {
        se_oracle(x.row(i), x.row(j), h) + if noise && i == j { h.sigma_y2() } else { 0.0 }
    })
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeatureMatrix {
    FeatureMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect())
}

fn random_hyper(rng: &mut ChaCha8Rng, d: usize) -> Hyperparams {
    let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.5)).collect();
    Hyperparams::new(rng.gen_range(0.5..2.0), &theta, rng.gen_range(0.01..0.2))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Projected gradient ascent on the box-constrained dual.
fn projected_gradient(k: &DMatrix<f64>, c: f64, iters: usize) -> Vec<f64> {
    let lmax = k.symmetric_eigenvalues().max();
    let step = 1.0 / lmax;
    let mut a = DVector::zeros(k.nrows());
    for _ in 0..iters {
        let g = DVector::from_element(k.nrows(), 1.0) - k * &a;
        a = (a + step * g).map(|v: f64| v.clamp(0.0, c));
    }
    a.as_slice().to_vec()
}

// ------------------------------------------------------------- criteria

fn gradient_correctness() -> Outcome {
    let t = Instant::now();
    let report = gradient_check(0, 5).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let max = report.max_rel_error();
    check(report.passed() && max < 1e-5, format!("max relative error {max:.2e}"))?;
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("5 instances, max relative error {max:.2e}, {elapsed:.2?}"))
}

fn gp_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.gen_range(3..=10);
        let d = 4;
        let x = random_matrix(&mut rng, n, d);
        let h = random_hyper(&mut rng, d);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let head = gp::fit_head(&x, &y, 0, &h).map_err(|e| e.to_string())?;

        let k = dense_gram(&x, &h, true);
        let kinv = k.clone().try_inverse().ok_or("oracle inverse failed")?;
        let mean_y = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean_y));
        let nll_oracle = 0.5 * yc.dot(&(&kinv * &yc))
            + 0.5 * k.determinant().ln()
            + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        let nll = gp::nll(&x, yc.as_slice(), &h).map_err(|e| e.to_string())?;
        check(close(nll, nll_oracle, 1e-8), format!("nll {nll} vs oracle {nll_oracle}"))?;
        worst = worst.max((nll - nll_oracle).abs());

        for _ in 0..4 {
            let xs: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let ks = DVector::from_iterator(n, x.iter_rows().map(|r| se_oracle(r, &xs, &h)));
            let mean_oracle = ks.dot(&(&kinv * &yc)) + mean_y;
            let var_oracle = h.sigma_f2() + h.sigma_y2() - ks.dot(&(&kinv * &ks));
            let p = gp::predict(&head, &x, &xs, &h).map_err(|e| e.to_string())?;
            check(close(p.mean, mean_oracle, 1e-8), format!("mean {} vs {mean_oracle}", p.mean))?;
            check(close(p.variance, var_oracle, 1e-8), format!("variance {} vs {var_oracle}", p.variance))?;
            worst = worst.max((p.mean - mean_oracle).abs()).max((p.variance - var_oracle).abs());
        }
    }

    // Near-noiseless interpolation at well separated inputs.
    let x = FeatureMatrix::from_vec(6, 2, (0..12).map(|i| (i / 2) as f64 * if i % 2 == 0 { 1.0 } else { -0.5 }).collect());
    let h = Hyperparams::new(1.0, &[1.0, 1.0], 1e-12);
    let y = [0.3, 0.7, 0.1, 0.9, 0.5, 0.2];
    let head = gp::fit_head(&x, &y, 0, &h).map_err(|e| e.to_string())?;
    let mut interp: f64 = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let p = gp::predict(&head, &x, x.row(i), &h).map_err(|e| e.to_string())?;
        interp = interp.max((p.mean - yi).abs());
    }
    check(interp < 1e-4, format!("interpolation error {interp:.2e}"))?;
    Ok(format!("max deviation from dense-inverse oracle {worst:.2e}, interpolation error {interp:.2e}"))
}

fn dual_optimality() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let n = rng.gen_range(12..=30);
        let d = random_matrix(&mut rng, n, 3);
        let h = random_hyper(&mut rng, 3);
        let c = [0.5, 1.0, 5.0][seed as usize % 3];
        let k = dense_gram(&d, &h, true);
        let sol = solve_box_qp(&k, c, DualSolverOptions::default());
        let reference = projected_gradient(&k, c, 200_000);
        let gap = (dual_objective(&k, &reference) - dual_objective(&k, &sol.alpha)).abs();
        let kkt = kkt_violation(&k, &sol.alpha, c);
        check(gap < 1e-4, format!("seed {seed}: objective gap {gap:.2e}"))?;
        check(kkt < 1e-5, format!("seed {seed}: KKT residual {kkt:.2e}"))?;
        worst_gap = worst_gap.max(gap);
        worst_kkt = worst_kkt.max(kkt);
    }
    for (sf2, sy2, c) in [(1.0, 0.1, 10.0), (1.0, 0.1, 0.5), (0.02, 0.002, 1.0)] {
        let k = DMatrix::from_element(1, 1, sf2 + sy2);
        let a = solve_box_qp(&k, c, DualSolverOptions::default()).alpha[0];
        let expected = f64::min(c, 1.0 / (sf2 + sy2));
        check(a == expected, format!("scalar case: {a} vs {expected}"))?;
    }
    Ok(format!("objective gap {worst_gap:.2e}, KKT residual {worst_kkt:.2e}, scalar cases exact"))
}

fn difference_combinatorics() -> Outcome {
    for n in 1..=4 {
        for p in 1..=3 {
            let mut rng = ChaCha8Rng::seed_from_u64((n * 10 + p) as u64);
            let low = random_matrix(&mut rng, n, 3);
            let high: Vec<_> = (0..n).map(|_| random_matrix(&mut rng, p, 3)).collect();
            let poor: Vec<_> = (0..n).map(|_| random_matrix(&mut rng, p, 3)).collect();
            let set = build_differences(&low, &high, &poor).map_err(|e| e.to_string())?;
            check(set.len() == n * (2 * p + p * p), format!("N={n} p={p}: {} vectors", set.len()))?;

            let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
            let mut expected = Vec::new();
            for i in 0..n {
                for j in 0..p {
                    expected.push(sub(low.row(i), high[i].row(j)));
                }
                for k in 0..p {
                    expected.push(sub(poor[i].row(k), low.row(i)));
                }
                for j in 0..p {
                    for k in 0..p {
                        expected.push(sub(poor[i].row(k), high[i].row(j)));
                    }
                }
            }
            for (r, e) in expected.iter().enumerate() {
                check(set.vectors.row(r) == e.as_slice(), format!("N={n} p={p}: row {r} differs"))?;
            }
        }
    }
    Ok("all (N, p) in 1..4 x 1..3 match brute-force enumeration".into())
}

fn cluster_term_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (n, p, d) = (3, 2, 4);
        let high: Vec<_> = (0..n).map(|_| random_matrix(&mut rng, p, d)).collect();
        let poor: Vec<_> = (0..n).map(|_| random_matrix(&mut rng, p, d)).collect();
        let h = random_hyper(&mut rng, d);
        let mut brute = 0.0;
        for i in 0..n {
            for j in 0..p {
                for k in 0..p {
                    brute += se_oracle(high[i].row(j), high[i].row(k), &h).powi(2);
                    brute -= se_oracle(high[i].row(j), poor[i].row(k), &h).powi(2);
                }
            }
        }
        let got = cluster_term(&high, &poor, &h).map_err(|e| e.to_string())?;
        check((got - brute).abs() < 1e-10, format!("{got} vs brute force {brute}"))?;
        worst = worst.max((got - brute).abs());
        let zero = cluster_term(&high, &high, &h).map_err(|e| e.to_string())?;
        check(zero == 0.0, format!("identical blocks give {zero}"))?;
    }
    Ok(format!("max deviation from brute force {worst:.2e}; identical blocks give 0"))
}

struct SmallDataset {
    _dir: tempfile::TempDir,
    manifest: DatasetManifest,
}

fn small_dataset(n: usize, seed: u64) -> SmallDataset {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = SyntheticDatasetConfig {
        n_images: n,
        image_size: 24,
        p: 2,
        seed,
        ..Default::default()
    };
    gen_synthetic_dataset(&cfg, dir.path()).expect("dataset");
    let manifest = DatasetManifest::load(&dir.path().join(DatasetManifest::DEFAULT_NAME)).expect("manifest");
    SmallDataset { _dir: dir, manifest }
}

fn training_contract() -> Outcome {
    let data = small_dataset(12, 5);
    let (set, _) = load_training_set(&data.manifest).map_err(|e| e.to_string())?;
    let cfg = JointConfig::default();
    let (model_a, log) = train_joint(&set, &cfg).map_err(|e| e.to_string())?;
    let (model_b, log_b) = train_joint(&set, &cfg).map_err(|e| e.to_string())?;
    check(!log.cycles.is_empty() && log.cycles.len() <= 20, format!("{} cycles", log.cycles.len()))?;
    for c in &log.cycles {
        check(c.delta_z.is_finite(), format!("cycle {} has no finite dZ", c.cycle))?;
        check(
            c.scg_trace.windows(2).all(|w| w[1] <= w[0]) && c.z_after_h <= c.z_after_alpha,
            format!("cycle {}: hyperparameter step increased Z", c.cycle),
        )?;
    }
    check(log == log_b, "training logs differ between identical runs")?;
    check(
        model_to_json(&model_a) == model_to_json(&model_b),
        "serialized models differ between identical runs",
    )?;
    let dz: Vec<String> = log.cycles.iter().map(|c| format!("{:.1e}", c.delta_z.abs())).collect();
    Ok(format!(
        "{} cycles ({}), |dZ| = [{}], monotone h-steps, bit-identical reruns",
        log.cycles.len(),
        if log.converged { "converged" } else { "cycle cap" },
        dz.join(", ")
    ))
}

fn experiment() -> Result<ExperimentReport, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        seed: EXPERIMENT_SEED,
        joint: JointConfig {
            c: EXPERIMENT_C,
            cluster_weight: EXPERIMENT_CLUSTER_WEIGHT,
            ..Default::default()
        },
        ..Default::default()
    };
    run_synthetic_experiment(&cfg, dir.path()).map_err(|e| e.to_string())
}

fn end_to_end(r: &ExperimentReport) -> Outcome {
    let r_txt: Vec<String> = r
        .test_eval
        .pearson
        .iter()
        .map(|p| p.map_or("null".into(), |v| format!("{v:.3}")))
        .collect();
    let detail = format!(
        "pearson [{}], ranking {}/{} = {:.1}%, {} cycles, {:.0?} total",
        r_txt.join(", "),
        r.ranking_wins,
        r.ranking_pairs,
        100.0 * r.ranking_accuracy(),
        r.log.cycles.len(),
        r.total_time
    );
    let pearson_ok = r.test_eval.pearson.iter().all(|p| p.is_some_and(|v| v >= 0.5));
    check(pearson_ok, format!("pearson below 0.5: {detail}"))?;
    check(r.ranking_accuracy() >= 0.9, format!("ranking below 90%: {detail}"))?;
    check(r.total_time < Duration::from_secs(600), format!("too slow: {detail}"))?;
    Ok(detail)
}

fn traversal_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut total = 0;
    for draw in 0..1000 {
        let count = rng.gen_range(1..=40);
        let cfg = TraversalConfig { count, ..Default::default() };
        let mut param = |scale: f64| {
            ParamVector::new(rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2), rng.gen_range(-0.1..0.6) * scale)
        };
        let m = param(1.0);
        let y = ParamVector::from_array(param(1.0).to_array().map(|v| v.clamp(0.0, 1.0)));
        let y = ParamVector::new(y.saturation, y.brightness, y.contrast.min(0.5));
        let s = ParamVector::from_array(param(0.3).to_array().map(|v| v.abs() * 0.2));
        let grid = gen_param_grid(&m, &s, &y, &cfg).map_err(|e| format!("draw {draw}: {e}"))?;
        let (lo, hi) = cfg.bounds(&y);
        for c in &grid.candidates {
            check(c.is_physical(), format!("draw {draw}: {c:?} outside physical ranges"))?;
            for j in 0..3 {
                check(lo[j] <= c.get(j) && c.get(j) <= hi[j], format!("draw {draw}: {c:?} outside bounds"))?;
            }
        }
        let expected = if grid.zero_stride { 1 } else { count };
        check(
            grid.candidates.len() + grid.duplicates_removed == expected,
            format!("draw {draw}: {} + {} duplicates != {expected}", grid.candidates.len(), grid.duplicates_removed),
        )?;
        total += grid.candidates.len();
    }
    Ok(format!("1000 draws, {total} candidates, all within bounds"))
}

fn enhancement_efficacy(r: &ExperimentReport) -> Outcome {
    let detail = format!(
        "{}/{} = {:.0}% of test images moved closer to the expert",
        r.enhance_successes,
        r.enhance_images,
        100.0 * r.enhance_rate()
    );
    check(r.enhance_rate() >= 0.8, detail.clone())?;
    Ok(detail)
}

fn probe_features(model: &TrainedModel, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    (0..n)
        .map(|_| {
            let row = model.train_features.row(rng.gen_range(0..model.train_features.rows()));
            row.iter()
                .zip(&model.stats.mean)
                .zip(&model.stats.scale)
                .map(|((z, m), s)| (z + rng.gen_range(-0.3..0.3)) * s + m)
                .collect()
        })
        .collect()
}

fn persistence() -> Outcome {
    let data = small_dataset(8, 6);
    let (set, _) = load_training_set(&data.manifest).map_err(|e| e.to_string())?;
    let cfg = JointConfig { max_cycles: 2, ..Default::default() };
    let (model, _) = train_joint(&set, &cfg).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.json");
    save_model(&model, &path).map_err(|e| e.to_string())?;
    let back = load_model(&path).map_err(|e| e.to_string())?;

    let mut worst: f64 = 0.0;
    let probes = probe_features(&model, 10);
    for f in &probes {
        let (m1, s1) = model.predict_params(f).map_err(|e| e.to_string())?;
        let (m2, s2) = back.predict_params(f).map_err(|e| e.to_string())?;
        for j in 0..3 {
            worst = worst.max((m1.get(j) - m2.get(j)).abs()).max((s1.get(j) - s2.get(j)).abs());
        }
        let q1 = model.quality_score(&probes[0], f).map_err(|e| e.to_string())?;
        let q2 = back.quality_score(&probes[0], f).map_err(|e| e.to_string())?;
        worst = worst.max((q1 - q2).abs());
    }
    check(worst <= 1e-12, format!("round trip changed predictions by {worst:.2e}"))?;

    let text = model_to_json(&model);
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let origin = Path::new("model.json");
    let expect_field = |v: &serde_json::Value, field: &str| -> Result<(), String> {
        match model_from_json(&v.to_string(), origin) {
            Ok(_) => Err(format!("corruption of `{field}` was accepted")),
            Err(e) => check(e.to_string().contains(field), format!("diagnostic `{e}` does not name `{field}`")),
        }
    };
    let mut v = value.clone();
    v["heads"][1]["weights"] = serde_json::Value::String(String::new());
    expect_field(&v, "heads[1].weights")?;
    let mut v = value.clone();
    v["standardization"]["scale"] = v["standardization"]["mean"].clone();
    v["standardization"]["scale"] = serde_json::Value::String(String::new());
    expect_field(&v, "standardization.scale")?;
    let mut v = value.clone();
    v.as_object_mut().unwrap().remove("hyperparams");
    expect_field(&v, "hyperparams")?;
    let mut v = value.clone();
    v["ranking"]["alpha"] = serde_json::Value::String("AAAAAAAA8D8=".into());
    expect_field(&v, "ranking.alpha")?;

    value["version"] = serde_json::json!(99);
    check(
        matches!(model_from_json(&value.to_string(), origin), Err(Error::VersionMismatch { .. })),
        "future version not reported as a version mismatch",
    )?;
    value["version"] = serde_json::json!(1);
    value["extra_field"] = serde_json::json!(true);
    check(
        matches!(model_from_json(&value.to_string(), origin), Err(Error::VersionMismatch { .. })),
        "unknown field not reported as a version mismatch",
    )?;
    check(model_from_json(&text[..text.len() / 2], origin).is_err(), "truncated file accepted")?;
    Ok(format!("max round-trip deviation {worst:.1e}; corrupted fields named in diagnostics"))
}

fn synthetic_model(n: usize, rng: &mut ChaCha8Rng) -> TrainedModel {
    let d = FEATURE_DIM;
    let x = random_matrix(rng, n, d);
    let h = Hyperparams::isotropic(d, 0.02, 1.0 / d as f64, 0.002);
    let heads: Vec<GpHead> = (0..3)
        .map(|m| {
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
            gp::fit_head(&x, &y, m, &h).expect("head")
        })
        .collect();
    let empty = FeatureMatrix::zeros(0, d);
    TrainedModel {
        hyperparams: h,
        heads,
        rank: RankModel {
            alpha: Vec::new(),
            c: 1.0,
            differences: DifferenceSet {
                vectors: empty,
                provenance: Vec::new(),
                p: 1,
            },
        },
        stats: StandardizationStats {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        },
        train_features: x,
        traversal: TraversalConfig::default(),
    }
}

fn scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let sizes = [50usize, 100, 200];
    let mut times = Vec::new();
    for &n in &sizes {
        let model = synthetic_model(n, &mut rng);
        let probes: Vec<Vec<f64>> = (0..50).map(|_| (0..FEATURE_DIM).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        let mut batches = Vec::new();
        for _ in 0..9 {
            let t = Instant::now();
            for _ in 0..4 {
                for p in &probes {
                    std::hint::black_box(model.predict_standardized(p).expect("predict"));
                }
            }
            batches.push(t.elapsed().as_secs_f64() / 200.0);
        }
        batches.sort_by(f64::total_cmp);
        times.push(batches[batches.len() / 2]);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, times.iter().sum::<f64>() / 3.0);
    let sxy: f64 = xs.iter().zip(&times).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs.iter().zip(&times).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let ss_tot: f64 = times.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let us: Vec<String> = times.iter().map(|t| format!("{:.0}us", t * 1e6)).collect();
    check(slope > 0.0 && r2 > 0.95, format!("per-image times {us:?}, R^2 {r2:.4}"))?;

    // A persisted model predicts and enhances with the training data gone.
    let data = small_dataset(6, 8);
    let (set, _) = load_training_set(&data.manifest).map_err(|e| e.to_string())?;
    let img = RasterImage::load_png(&data.manifest.resolve(&data.manifest.entries[0].low.path))
        .map_err(|e| e.to_string())?;
    let (model, _) = train_joint(&set, &JointConfig { max_cycles: 1, ..Default::default() }).map_err(|e| e.to_string())?;
    let keep = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model_path = keep.path().join("model.json");
    save_model(&model, &model_path).map_err(|e| e.to_string())?;
    let data_dir = data.manifest.base_dir().to_path_buf();
    drop(data);
    check(!data_dir.exists(), "training directory still present")?;
    let loaded = load_model(&model_path).map_err(|e| e.to_string())?;
    loaded.predict_params(extract_features(&img).as_slice()).map_err(|e| e.to_string())?;
    let out = enhance(&loaded, &img, &TraversalConfig { count: 5, ..Default::default() }).map_err(|e| e.to_string())?;
    check(!out.ranked.is_empty(), "no enhanced candidates")?;
    Ok(format!(
        "per-image predict {} for N = 50/100/200, R^2 {r2:.4}; predict+enhance ran with training files deleted",
        us.join("/")
    ))
}

fn main() {
    // libtest-style flags such as `--nocapture` are accepted and ignored.
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, outcome: std::thread::Result<Outcome>| {
        let outcome = outcome.unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("acceptance {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("acceptance {id:>2} FAIL  {name}: {detail}");
            }
        }
    };

    report(1, "gradient correctness", catch_unwind(gradient_correctness));
    report(2, "GP exactness", catch_unwind(gp_exactness));
    report(3, "dual solver optimality", catch_unwind(dual_optimality));
    report(4, "difference-set combinatorics", catch_unwind(difference_combinatorics));
    report(5, "cluster term", catch_unwind(cluster_term_check));
    report(6, "training loop contract", catch_unwind(training_contract));
    let exp = catch_unwind(experiment);
    let exp_failure = |e: &str| -> Outcome { Err(format!("experiment failed: {e}")) };
    match &exp {
        Ok(Ok(r)) => report(7, "end-to-end recovery", catch_unwind(AssertUnwindSafe(|| end_to_end(r)))),
        Ok(Err(e)) => report(7, "end-to-end recovery", Ok(exp_failure(e))),
        Err(_) => report(7, "end-to-end recovery", Ok(exp_failure("panicked"))),
    }
    report(8, "traversal safety", catch_unwind(traversal_safety));
    match &exp {
        Ok(Ok(r)) => report(9, "enhancement efficacy", catch_unwind(AssertUnwindSafe(|| enhancement_efficacy(r)))),
        Ok(Err(e)) => report(9, "enhancement efficacy", Ok(exp_failure(e))),
        Err(_) => report(9, "enhancement efficacy", Ok(exp_failure("panicked"))),
    }
    report(10, "persistence", catch_unwind(persistence));
    report(11, "scaling and training-data independence", catch_unwind(scaling));

    println!(
        "acceptance: {} of 11 criteria passed in {:.0?}",
        11 - failures,
        start.elapsed()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
