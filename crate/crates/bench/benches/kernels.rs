use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use selfsim_bench::{direction, spiral, system};
use selfsim_core::measure::{atomic_approx, sample_measure};
use selfsim_core::projection::{projected_density, ProjectedAtoms};
use selfsim_core::spectral::{ft_2d, ft_2d_product};

fn densities(c: &mut Criterion) {
    let s = system();
    let z = direction();
    let mut group = c.benchmark_group("projected_density");
    group.sample_size(10);
    for depth in [8usize, 10, 12] {
        group.bench_with_input(BenchmarkId::from_parameter(depth), &depth, |b, &d| {
            b.iter(|| projected_density(&s, z, d, 0.01).unwrap())
        });
    }
    group.finish();
}

fn fourier(c: &mut Criterion) {
    let s = system();
    let freqs = spiral(64, 200.0);
    let atoms = atomic_approx(&s, 8).unwrap();
    let mut group = c.benchmark_group("fourier");
    group.sample_size(10);
    group.bench_function("direct_depth8_64freq", |b| b.iter(|| ft_2d(&atoms, black_box(&freqs))));
    group.bench_function("product_depth12_64freq", |b| {
        b.iter(|| freqs.iter().map(|xi| ft_2d_product(&s, 12, *xi)).sum::<selfsim_core::ComplexVal>())
    });
    let line = ProjectedAtoms::new(&s, direction(), 12);
    group.bench_function("projected_line_1000t", |b| {
        b.iter(|| (0..1000).map(|j| line.fourier(j as f64 * 0.3)).sum::<selfsim_core::ComplexVal>())
    });
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let s = system();
    let mut group = c.benchmark_group("sampling");
    group.sample_size(10);
    group.bench_function("chaos_game_100k", |b| {
        b.iter(|| sample_measure(&s, 100_000, 30, black_box(42)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, densities, fourier, sampling);
criterion_main!(benches);
