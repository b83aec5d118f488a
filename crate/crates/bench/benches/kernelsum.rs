use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mpf_bench::{random_weights, uniform_points};
use mpf_core::prelude::*;

fn backends(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_sum_1d");
    group.sample_size(10);
    let kernel = KernelSpec::gaussian(vec![1.0]);
    for n in [500, 2000, 8000] {
        let sources = uniform_points(n, 1, 20.0, 1);
        let targets = uniform_points(n, 1, 20.0, 2);
        let weights = random_weights(n, 3);
        for epsilon in [1e-3, 1e-7] {
            let req = KernelSumRequest {
                dim: 1,
                sources: &sources,
                source_weights: &weights,
                targets: &targets,
                kernel: &kernel,
                epsilon,
            };
            for backend in [Backend::Naive, Backend::DualTree, Backend::Fgt] {
                if backend == Backend::Naive && epsilon != 1e-3 {
                    continue;
                }
                let id = BenchmarkId::new(format!("{}/{epsilon:e}", backend.name()), n);
                group.bench_with_input(id, &req, |b, req| b.iter(|| kernel_sum(black_box(req), backend).unwrap()));
            }
        }
    }
    group.finish();
}

fn two_dimensional(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_sum_2d");
    group.sample_size(10);
    let n = 4000;
    let sources = uniform_points(n, 2, 10.0, 4);
    let targets = uniform_points(n, 2, 10.0, 5);
    let weights = random_weights(n, 6);
    let kernels = [
        ("gaussian", KernelSpec::gaussian(vec![0.5, 0.5])),
        ("cauchy", KernelSpec::monotone(vec![0.5, 0.5], |d| 1.0 / (1.0 + d * d))),
    ];
    for (name, kernel) in &kernels {
        let req = KernelSumRequest {
            dim: 2,
            sources: &sources,
            source_weights: &weights,
            targets: &targets,
            kernel,
            epsilon: 1e-4,
        };
        for backend in [Backend::Naive, Backend::DualTree, Backend::Fgt] {
            if backend == Backend::Fgt && !kernel.is_gaussian() {
                continue;
            }
            group.bench_function(format!("{name}/{}", backend.name()), |b| {
                b.iter(|| kernel_sum(black_box(&req), backend).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, backends, two_dimensional);
criterion_main!(benches);
