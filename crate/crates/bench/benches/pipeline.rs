use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gqlforge_bench::forged;
use gqlforge_core::eval::{analyze_dataset, compute_metrics, PredictionSet};
use gqlforge_core::fixture;
use gqlforge_core::quality::{filter_embedding, filter_masked_gql, HashEmbedder, MaskMode};

fn forge(c: &mut Criterion) {
    let mut group = c.benchmark_group("forge");
    group.sample_size(10);
    for workers in [1, 4] {
        group.bench_with_input(BenchmarkId::new("batch_20", workers), &workers, |b, &w| {
            b.iter(|| forged(20, 3, w).len())
        });
    }
    group.finish();
}

fn downstream(c: &mut Criterion) {
    let g = fixture::graph();
    let ds = forged(100, 5, 4);
    let preds = PredictionSet::from_gold(&ds);

    let mut group = c.benchmark_group("downstream");
    group.sample_size(20);
    group.bench_function("masked_filter", |b| {
        b.iter(|| filter_masked_gql(&ds, g.schema(), 3, MaskMode::Pairwise).unwrap().kept.len())
    });
    group.bench_function("embedding_filter", |b| {
        b.iter(|| filter_embedding(&ds, &HashEmbedder, 0.6).unwrap().kept.len())
    });
    group.bench_function("metrics", |b| b.iter(|| compute_metrics(&preds, &ds, &g).unwrap().ex));
    group.bench_function("analytics", |b| b.iter(|| analyze_dataset(&ds).total_keywords));
    group.finish();
}

criterion_group!(benches, forge, downstream);
criterion_main!(benches);
