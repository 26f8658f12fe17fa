//! Asset database index and weighted image/text similarity ranking.
//!
//! An asset's score for a query embedding `q` is
//! `w * max_i cos(thumb_i, q) + (1 - w) * cos(text, q)`, or just the image
//! term when the asset has no text annotation. Ranking is an exhaustive
//! scan, sorted by score descending with ties broken by ascending asset id.

mod manifest;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{check_dim, cosine, Embedder, EmbeddingError, UnitVector};
use crate::shoplist::QueryString;

pub use manifest::{build_index, index_digest, ingest_manifest, parse_manifest, write_manifest, ManifestRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("duplicate asset id {0:?}")]
    DuplicateAssetId(String),
    #[error("asset {id:?} has no embeddings and no embedding provider is configured")]
    MissingEmbeddingNoProvider { id: String },
    #[error("manifest line {line}: {reason}")]
    MalformedManifestLine { line: usize, reason: String },
    #[error("asset {id:?}: invalid embedding: {reason}")]
    InvalidEmbedding { id: String, reason: String },
    #[error("asset index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("weight w = {0} is outside [0, 1]")]
    InvalidWeight(f64),
    #[error("reading {path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// One database asset with its embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetRecord {
    pub id: String,
    pub text_annotation: Option<String>,
    pub thumbnail_refs: Vec<String>,
    pub mesh_ref: String,
    pub source: String,
    /// Parallel to `thumbnail_refs`.
    pub thumbnail_embeddings: Vec<UnitVector>,
    pub text_embedding: Option<UnitVector>,
}

/// Immutable, searchable set of assets sharing one embedding dimension.
#[derive(Debug, Clone)]
pub struct AssetIndex {
    records: Vec<AssetRecord>,
    by_id: HashMap<String, usize>,
    dimension: usize,
    base_dir: Option<PathBuf>,
}

impl AssetIndex {
    pub fn from_records(records: Vec<AssetRecord>) -> Result<Self, RetrievalError> {
        let mut by_id = HashMap::with_capacity(records.len());
        let mut dimension = None;
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(RetrievalError::DuplicateAssetId(r.id.clone()));
            }
            if r.thumbnail_embeddings.is_empty() || r.thumbnail_embeddings.len() != r.thumbnail_refs.len() {
                return Err(RetrievalError::InvalidEmbedding {
                    id: r.id.clone(),
                    reason: "need exactly one embedding per thumbnail".into(),
                });
            }
            for v in r.thumbnail_embeddings.iter().chain(&r.text_embedding) {
                let d = *dimension.get_or_insert(v.dim());
                check_dim(d, v.dim())?;
            }
        }
        Ok(Self {
            records,
            by_id,
            dimension: dimension.unwrap_or(0),
            base_dir: None,
        })
    }

    pub fn records(&self) -> &[AssetRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&AssetRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Resolves a thumbnail or mesh reference against the manifest folder.
    pub fn resolve(&self, reference: &str) -> PathBuf {
        manifest::resolve_ref(self.base_dir.as_deref(), reference)
    }

    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }
}

/// Retrieval knobs: candidates kept per item and the image-vs-text weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalParams {
    pub k: usize,
    pub w: f64,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self { k: 5, w: 0.5 }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(RetrievalError::InvalidWeight(self.w));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub asset_id: String,
    pub score: f64,
    pub image_score: f64,
    pub text_score: Option<f64>,
}

pub fn score_asset(asset: &AssetRecord, query: &UnitVector, w: f64) -> Result<RankedCandidate, EmbeddingError> {
    let mut image_score = f64::NEG_INFINITY;
    for thumb in &asset.thumbnail_embeddings {
        image_score = image_score.max(cosine(thumb, query)?);
    }
    let text_score = asset.text_embedding.as_ref().map(|t| cosine(t, query)).transpose()?;
    let score = match text_score {
        Some(t) => w * image_score + (1.0 - w) * t,
        None => image_score,
    };
    Ok(RankedCandidate {
        asset_id: asset.id.clone(),
        score,
        image_score,
        text_score,
    })
}

/// Score descending, then asset id ascending.
pub fn ranking_order(a: &RankedCandidate, b: &RankedCandidate) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.asset_id.cmp(&b.asset_id))
}

/// Ranks every asset against a precomputed query embedding.
pub fn rank_with_embedding(
    index: &AssetIndex,
    query: &UnitVector,
    params: RetrievalParams,
) -> Result<Vec<RankedCandidate>, RetrievalError> {
    params.validate()?;
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    check_dim(index.dimension(), query.dim())?;
    let mut scored = index
        .records()
        .iter()
        .map(|r| score_asset(r, query, params.w))
        .collect::<Result<Vec<_>, _>>()?;
    if params.k < scored.len() {
        scored.select_nth_unstable_by(params.k - 1, ranking_order);
        scored.truncate(params.k);
    }
    scored.sort_by(ranking_order);
    Ok(scored)
}

/// Embeds the query text (through the cache) and returns the top `k` assets.
pub fn top_k(
    index: &AssetIndex,
    embedder: &Embedder,
    query: &QueryString,
    params: RetrievalParams,
) -> Result<Vec<RankedCandidate>, RetrievalError> {
    params.validate()?;
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let q = embedder.embed_text(query.as_str())?;
    rank_with_embedding(index, &q, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::normalize(c.to_vec()).unwrap()
    }

    fn asset(id: &str, thumbs: &[&[f64]], text: Option<&[f64]>) -> AssetRecord {
        AssetRecord {
            id: id.into(),
            text_annotation: text.map(|_| format!("{id} annotation")),
            thumbnail_refs: thumbs.iter().enumerate().map(|(i, _)| format!("{id}_{i}.png")).collect(),
            mesh_ref: format!("{id}.glb"),
            source: "test".into(),
            thumbnail_embeddings: thumbs.iter().map(|t| uv(t)).collect(),
            text_embedding: text.map(uv),
        }
    }

    #[test]
    fn weight_endpoints_and_midpoint() {
        // image 0.4 and text 0.8 against q = e0
        let a = asset("a", &[&[0.4, 0.916_515_138_991_168]], Some(&[0.8, 0.6]));
        let q = uv(&[1.0, 0.0]);
        let c1 = score_asset(&a, &q, 1.0).unwrap();
        assert_eq!(c1.score, c1.image_score);
        let c0 = score_asset(&a, &q, 0.0).unwrap();
        assert_eq!(c0.score, c0.text_score.unwrap());
        let half = score_asset(&a, &q, 0.5).unwrap();
        assert!((half.image_score - 0.4).abs() < 1e-12);
        assert!((half.score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn missing_text_uses_image_only() {
        let a = asset("a", &[&[1.0, 0.0], &[0.0, 1.0]], None);
        let c = score_asset(&a, &uv(&[0.0, 1.0]), 0.3).unwrap();
        assert_eq!(c.score, 1.0);
        assert_eq!(c.text_score, None);
    }

    #[test]
    fn ties_break_by_id_and_k_saturates() {
        let idx = AssetIndex::from_records(vec![
            asset("b", &[&[1.0, 0.0]], None),
            asset("a", &[&[1.0, 0.0]], None),
            asset("c", &[&[0.0, 1.0]], None),
        ])
        .unwrap();
        let ranked = rank_with_embedding(&idx, &uv(&[1.0, 0.0]), RetrievalParams { k: 10, w: 0.5 }).unwrap();
        let ids: Vec<_> = ranked.iter().map(|c| c.asset_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        let top1 = rank_with_embedding(&idx, &uv(&[1.0, 0.0]), RetrievalParams { k: 1, w: 0.5 }).unwrap();
        assert_eq!(top1[0].asset_id, "a");
    }

    #[test]
    fn empty_index_and_bad_params() {
        let idx = AssetIndex::from_records(vec![]).unwrap();
        assert_eq!(
            rank_with_embedding(&idx, &uv(&[1.0]), RetrievalParams::default()).unwrap_err(),
            RetrievalError::EmptyIndex
        );
        assert_eq!(RetrievalParams { k: 0, w: 0.5 }.validate(), Err(RetrievalError::InvalidK));
        assert!(RetrievalParams { k: 1, w: 1.5 }.validate().is_err());
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let err = AssetIndex::from_records(vec![asset("a", &[&[1.0, 0.0]], Some(&[1.0, 0.0, 0.0]))]).unwrap_err();
        assert!(matches!(err, RetrievalError::Embedding(EmbeddingError::DimensionMismatch { .. })));
    }
}
