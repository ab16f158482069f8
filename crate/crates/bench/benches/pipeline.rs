use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use proofspace::{clustering, corpus, geometry, lexer};
use proofspace_bench::{clustered_points, lean_source, random_embeddings};

fn cosine(c: &mut Criterion) {
    let mut g = c.benchmark_group("cosine_distance_matrix");
    for n in [32, 128] {
        let e = random_embeddings(n, 512, 7);
        g.bench_with_input(BenchmarkId::from_parameter(n), &e, |b, e| b.iter(|| corpus::cosine_distance_matrix(black_box(e)).unwrap()));
    }
    g.finish();
}

fn mds(c: &mut Criterion) {
    let mut g = c.benchmark_group("classical_mds");
    for n in [32, 96] {
        let d = corpus::cosine_distance_matrix(&random_embeddings(n, 64, 11)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &d, |b, d| b.iter(|| geometry::classical_mds(black_box(d), 3).unwrap()));
    }
    g.finish();
}

fn gmm(c: &mut Criterion) {
    let pts = clustered_points(120, 3, 5);
    c.bench_function("fit_gmm/k3", |b| b.iter(|| clustering::fit_gmm(black_box(&pts), 3, 42).unwrap()));
    c.bench_function("select_gmm/k_max8", |b| b.iter(|| clustering::select_gmm(black_box(&pts), 8, 42).unwrap()));
}

fn strip(c: &mut Criterion) {
    let src = lean_source(2000);
    c.bench_function("strip_comments/2000_lines", |b| b.iter(|| lexer::strip_comments(black_box(&src)).unwrap()));
}

criterion_group!(benches, cosine, mds, gmm, strip);
criterion_main!(benches);
