use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nonlocal_core::config::random_field;
use nonlocal_core::operator::{direct_into, direct_into_sequential};
use nonlocal_core::{ConvolutionMethod, Grid, KernelFamily, KernelParams, KernelSpec, Operator};

fn setup(dimension: usize, n: usize) -> (Grid, nonlocal_core::Kernel, Vec<f64>) {
    let grid = Grid::new(dimension, 25.0, n).unwrap();
    let spec = KernelSpec::family(KernelFamily::K1, KernelParams::defaults(KernelFamily::K1, dimension), dimension).unwrap();
    let kernel = spec.sample(dimension, grid.spacing()).unwrap();
    let u = random_field(grid, 7, 1.0).into_values();
    (grid, kernel, u)
}

// Parallel rows vs the single-threaded loop. Without the `parallel`
// feature both arms run sequentially.
fn direct_threads(c: &mut Criterion) {
    let mut group = c.benchmark_group("direct");
    for (dimension, n) in [(1, 2000), (2, 64), (2, 128)] {
        let (grid, kernel, u) = setup(dimension, n);
        let mut out = vec![0.0; u.len()];
        let label = format!("{dimension}d-{n}");
        group.bench_with_input(BenchmarkId::new("sequential", &label), &u, |b, u| {
            b.iter(|| direct_into_sequential(&kernel, &grid, black_box(u), &mut out))
        });
        let mut out = vec![0.0; u.len()];
        group.bench_with_input(BenchmarkId::new("parallel", &label), &u, |b, u| {
            b.iter(|| direct_into(&kernel, &grid, black_box(u), &mut out))
        });
    }
    group.finish();
}

fn direct_vs_fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("method");
    group.sample_size(20);
    for (dimension, n) in [(1, 600), (2, 128), (2, 256)] {
        let (grid, kernel, u) = setup(dimension, n);
        let label = format!("{dimension}d-{n}");
        for method in [ConvolutionMethod::Direct, ConvolutionMethod::Fft] {
            let op = Operator::with_method(&kernel, &grid, method).unwrap();
            let mut out = vec![0.0; u.len()];
            group.bench_with_input(BenchmarkId::new(format!("{method:?}"), &label), &u, |b, u| {
                b.iter(|| op.apply_into(black_box(u), &mut out))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, direct_threads, direct_vs_fft);
criterion_main!(benches);
