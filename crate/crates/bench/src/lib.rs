//! Synthetic inputs shared by the benchmarks under `benches/`.

use curator_core::embedding::UnitVector;
use curator_core::metrics::AssetViews;
use curator_core::retrieval::{AssetIndex, AssetRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng, dim: usize) -> UnitVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(u) = UnitVector::normalize(v) {
            return u;
        }
    }
}

/// `n` assets with `views` thumbnails each; every other asset has a text
/// annotation embedding.
pub fn index(n: usize, views: usize, dim: usize, seed: u64) -> AssetIndex {
    let mut rng = rng(seed);
    let records = (0..n)
        .map(|i| AssetRecord {
            id: format!("asset_{i:06}"),
            text_annotation: (i % 2 == 0).then(|| format!("asset number {i}")),
            thumbnail_refs: (0..views).map(|v| format!("thumbs/{i}_{v}.png")).collect(),
            mesh_ref: format!("meshes/{i}.glb"),
            source: "synthetic".into(),
            thumbnail_embeddings: (0..views).map(|_| unit(&mut rng, dim)).collect(),
            text_embedding: (i % 2 == 0).then(|| unit(&mut rng, dim)),
        })
        .collect();
    AssetIndex::from_records(records).expect("synthetic records are valid")
}

pub fn collection(n: usize, views: usize, dim: usize, seed: u64) -> Vec<AssetViews> {
    let mut rng = rng(seed);
    (0..n)
        .map(|i| AssetViews::new(format!("a{i}"), (0..views).map(|_| unit(&mut rng, dim)).collect()).expect("views present"))
        .collect()
}
