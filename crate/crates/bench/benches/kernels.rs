//! Benchmarks for the hot kernels: ball enumeration, residue
//! enumeration, local densities, factorization, and the growth fit.
//! Budgets are admission caps, not counters, so one budget is shared.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use homocount_core::enumerate::{
    count_points, count_sl2, enumerate_exhaustive, enumerate_sl2, growth_fit,
};
use homocount_core::geometry::{GroupSpec, NormMode, PolynomialMap, VarietySpec};
use homocount_core::modular::{enumerate_group_mod, group_order, local_density};
use homocount_core::numeric::{Factorization, primes_up_to};
use homocount_core::Budget;

fn ball_enumeration(c: &mut Criterion) {
    let budget = Budget::new(10_000_000_000);
    let mut group = c.benchmark_group("ball");
    for t in [500.0f64, 2000.0, 8000.0] {
        group.bench_with_input(BenchmarkId::new("count_sl2", t as u64), &t, |b, &t| {
            b.iter(|| count_sl2(black_box(t), NormMode::Euclidean, &budget).unwrap())
        });
    }
    group.sample_size(20);
    group.bench_function("enumerate_sl2_500", |b| {
        b.iter(|| enumerate_sl2(black_box(500.0), NormMode::Euclidean, &budget).unwrap())
    });
    group.bench_function("backtracking_sl2_30", |b| {
        let v = VarietySpec::sl(2);
        b.iter(|| enumerate_exhaustive(&v, black_box(30.0), NormMode::Euclidean, &budget).unwrap())
    });
    group.bench_function("pell_count_1e9", |b| {
        let v = VarietySpec::pell(2).unwrap();
        b.iter(|| count_points(&v, black_box(1e9), NormMode::Euclidean, &budget).unwrap())
    });
    group.finish();
}

fn residue_kernels(c: &mut Criterion) {
    let budget = Budget::default();
    let sl2 = GroupSpec::sl(2);
    let trace = PolynomialMap::trace(2);
    let mut group = c.benchmark_group("residue");
    group.bench_function("enumerate_group_mod_16", |b| {
        b.iter(|| enumerate_group_mod(&sl2, black_box(16), &budget).unwrap().len())
    });
    group.bench_function("group_order_720720", |b| {
        b.iter(|| group_order(&sl2, black_box(720_720), &budget).unwrap())
    });
    for d in [27u64, 32, 125] {
        group.bench_with_input(BenchmarkId::new("trace_density", d), &d, |b, &d| {
            b.iter(|| local_density(&trace, &sl2, black_box(d), &budget).unwrap())
        });
    }
    group.finish();
}

fn arithmetic(c: &mut Criterion) {
    let mut group = c.benchmark_group("arithmetic");
    group.bench_function("factorize_window_1e12", |b| {
        b.iter(|| {
            let mut acc = 0u32;
            for n in 1_000_000_000_000u128..1_000_000_000_200 {
                acc += Factorization::of(black_box(n)).unwrap().omega();
            }
            acc
        })
    });
    group.bench_function("primorial_10000", |b| {
        b.iter(|| Factorization::primorial(black_box(10_000)).ln_value())
    });
    group.bench_function("primes_up_to_1e6", |b| {
        b.iter(|| primes_up_to(black_box(1_000_000)).len())
    });
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let budget = Budget::default();
    let grid: Vec<(f64, u64)> = (0..12)
        .map(|i| {
            let t = 100.0 * 1.5f64.powi(i);
            (t, count_sl2(t, NormMode::Euclidean, &budget).unwrap())
        })
        .collect();
    c.bench_function("growth_fit_12", |b| {
        b.iter(|| growth_fit(black_box(&grid)).unwrap().alpha_hat)
    });
}

criterion_group!(benches, ball_enumeration, residue_kernels, arithmetic, fitting);
criterion_main!(benches);
