use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gprank_core::features::FEATURE_DIM;
use gprank_core::gp;
use gprank_core::kernel::{gram, Hyperparams};
use gprank_core::{extract_features, FeatureMatrix, RasterImage};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect())
}

fn bench_gram(c: &mut Criterion) {
    let h = Hyperparams::isotropic(FEATURE_DIM, 1.0, 1.0 / FEATURE_DIM as f64, 0.1);
    let mut group = c.benchmark_group("gram");
    for n in [40, 160, 320] {
        let a = random_matrix(n, FEATURE_DIM, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| gram(black_box(a), black_box(a), &h, true).unwrap())
        });
    }
    group.finish();
}

fn bench_features(c: &mut Criterion) {
    let mut group = c.benchmark_group("extract_features");
    for side in [48, 256] {
        let img = RasterImage::from_fn(side, side, |x, y| {
            let t = (x * 31 + y * 17) as f64 % 97.0 / 97.0;
            [t, 0.5 * t + 0.2, 1.0 - t]
        })
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(side), &img, |b, img| {
            b.iter(|| extract_features(black_box(img)))
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let h = Hyperparams::isotropic(FEATURE_DIM, 0.02, 1.0 / FEATURE_DIM as f64, 0.002);
    let mut group = c.benchmark_group("predict");
    for n in [50, 100, 200] {
        let train = random_matrix(n, FEATURE_DIM, 2);
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 0.1 + 0.4).collect();
        let head = gp::fit_head(&train, &y, 0, &h).unwrap();
        let x = random_matrix(1, FEATURE_DIM, 3).row(0).to_vec();
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| gp::predict(&head, &train, black_box(x), &h).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_gram, bench_features, bench_predict);
criterion_main!(benches);
