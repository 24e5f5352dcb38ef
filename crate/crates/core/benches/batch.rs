//! Sequential vs parallel throughput on the batch entry points: instance
//! labeling (two MINLP solves per instance) and batch brute solving.
//!
//! Run with `cargo bench -p minlp-select`. The parallel cases need the
//! default `parallel` feature; without it they degrade to sequential and
//! the comparison collapses.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minlp_select::model::{generate_instance, GeneratorSpec};
use minlp_select::pipeline::build_dataset;
use minlp_select::solvers::{brute_solve, SolveLimits};
use minlp_select::Parallelism;
use std::hint::black_box;

fn corpus(count: usize) -> Vec<minlp_select::model::Problem> {
    (0..count)
        .map(|i| {
            generate_instance(&GeneratorSpec {
                n_binary: 3,
                n_integer: 0,
                n_continuous: 3,
                n_constraints: 4,
                seed: 1000 + i as u64,
                ..GeneratorSpec::default()
            })
            .unwrap()
        })
        .collect()
}

fn bench_labeling(c: &mut Criterion) {
    let problems = corpus(8);
    let mut group = c.benchmark_group("label_batch");
    group.sample_size(10);
    for (name, mode) in [
        ("sequential", Parallelism::Sequential),
        ("parallel", Parallelism::Auto),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                let ds = build_dataset(black_box(&problems), 30.0, mode).unwrap();
                black_box(ds.records.len())
            })
        });
    }
    group.finish();
}

fn bench_brute_batch(c: &mut Criterion) {
    let problems = corpus(8);
    let limits = SolveLimits::default();
    let mut group = c.benchmark_group("brute_batch");
    group.sample_size(10);

    group.bench_function("sequential", |b| {
        b.iter(|| {
            let objs: Vec<f64> = problems
                .iter()
                .map(|p| brute_solve(p, &limits).unwrap().objective.unwrap())
                .collect();
            black_box(objs)
        })
    });

    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        use rayon::prelude::*;
        b.iter(|| {
            let objs: Vec<f64> = problems
                .par_iter()
                .map(|p| brute_solve(p, &limits).unwrap().objective.unwrap())
                .collect();
            black_box(objs)
        })
    });

    group.finish();
}

criterion_group!(benches, bench_labeling, bench_brute_batch);
criterion_main!(benches);
