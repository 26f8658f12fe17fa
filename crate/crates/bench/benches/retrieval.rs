use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use curator_core::embedding::{Embedder, EmbeddingCache, HashEmbeddingProvider};
use curator_core::retrieval::{top_k, RetrievalParams};
use curator_core::shoplist::{QueryString, SceneDescription};

const DIM: usize = 128;

fn top_k_30k(c: &mut Criterion) {
    let index = curator_bench::index(30_000, 1, DIM, 1);
    let embedder = Embedder::new(Arc::new(HashEmbeddingProvider::new(DIM)), Arc::new(EmbeddingCache::new()));
    let scene = SceneDescription::new("Poseidon's living room").unwrap();
    let query = QueryString::for_scene("throne, in a scene of Poseidon's living room, with intricate carvings of ocean life.", &scene).unwrap();
    let mut group = c.benchmark_group("top_k_30k");
    group.sample_size(20);
    for k in [1, 5, 50] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| top_k(&index, &embedder, &query, RetrievalParams { k, w: 0.5 }).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, top_k_30k);
criterion_main!(benches);
