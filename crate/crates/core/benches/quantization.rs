//! Single-thread pool against the default rayon pool. Building with
//! `--no-default-features` swaps in the plain-iterator backend, in which case
//! both variants measure the sequential code path.

use std::hint::black_box;

use bt_core::operator::random_hermitian;
use bt_core::quantization::{Quantizer, ToeplitzQuantizer};
use bt_core::smearing::{markov_smear_apply, MarkovOptions, RhoField};
use bt_core::sphere::{QuadratureGrid, SphereFunction};
use bt_core::unsharpness::metric_reconstruct;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

fn pools() -> [(&'static str, ThreadPool); 2] {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    [("sequential", one), ("parallel", all)]
}

fn toeplitz(c: &mut Criterion) {
    let mut group = c.benchmark_group("toeplitz");
    group.sample_size(20);
    let f = SphereFunction::random(4, &mut ChaCha8Rng::seed_from_u64(1));
    for k in [16, 64, 128] {
        let q = ToeplitzQuantizer::new(k, 4).unwrap();
        for (name, pool) in &pools() {
            group.bench_with_input(BenchmarkId::new(*name, k), &k, |b, _| {
                pool.install(|| b.iter(|| q.quantize(black_box(&f)).unwrap()))
            });
        }
    }
    group.finish();
}

fn dequantize(c: &mut Criterion) {
    let mut group = c.benchmark_group("dequantize");
    group.sample_size(20);
    for k in [16, 64, 128] {
        let q = ToeplitzQuantizer::new(k, 8).unwrap();
        let a = random_hermitian(k + 1, 2);
        for (name, pool) in &pools() {
            group.bench_with_input(BenchmarkId::new(*name, k), &k, |b, _| {
                pool.install(|| b.iter(|| q.dequantize(black_box(&a)).unwrap()))
            });
        }
    }
    group.finish();
}

fn metric(c: &mut Criterion) {
    let mut group = c.benchmark_group("metric");
    group.sample_size(10);
    let grid = QuadratureGrid::build(8);
    for k in [16, 32, 64] {
        let coarse = ToeplitzQuantizer::new(k, 2).unwrap();
        let fine = ToeplitzQuantizer::new(2 * k, 2).unwrap();
        for (name, pool) in &pools() {
            group.bench_with_input(BenchmarkId::new(*name, k), &k, |b, _| {
                pool.install(|| b.iter(|| metric_reconstruct(&coarse, &fine, &grid, None).unwrap()))
            });
        }
    }
    group.finish();
}

fn markov(c: &mut Criterion) {
    let mut group = c.benchmark_group("markov");
    group.sample_size(10);
    let f = SphereFunction::random(2, &mut ChaCha8Rng::seed_from_u64(3));
    let rho = RhoField::ZzRankOne(0.5);
    let opts = MarkovOptions::default();
    for (name, pool) in &pools() {
        group.bench_function(*name, |b| {
            pool.install(|| b.iter(|| markov_smear_apply(black_box(&f), &rho, 1.0 / 64.0, &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, toeplitz, dequantize, metric, markov);
criterion_main!(benches);
