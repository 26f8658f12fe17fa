//! JSON Lines asset manifests.
//!
//! ```text
//! {"id":"coral_throne","text_annotation":"a throne carved from coral","thumbnail_refs":["thumbs/coral_throne.png"],"mesh_ref":"meshes/coral_throne.glb","source":"fixture"}
//! ```
//!
//! `thumbnail_embeddings` (one float array per thumbnail) and
//! `text_embedding` may be given inline; missing ones are computed with the
//! configured embedder. Relative refs resolve against the manifest's folder.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AssetIndex, AssetRecord, RetrievalError};
use crate::embedding::{Embedder, UnitVector};
use crate::provider::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub text_annotation: Option<String>,
    pub thumbnail_refs: Vec<String>,
    pub mesh_ref: String,
    #[serde(default)]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnail_embeddings: Option<Vec<Vec<f32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_embedding: Option<Vec<f32>>,
}

impl From<&AssetRecord> for ManifestRecord {
    fn from(r: &AssetRecord) -> Self {
        Self {
            id: r.id.clone(),
            text_annotation: r.text_annotation.clone(),
            thumbnail_refs: r.thumbnail_refs.clone(),
            mesh_ref: r.mesh_ref.clone(),
            source: r.source.clone(),
            thumbnail_embeddings: Some(r.thumbnail_embeddings.iter().map(UnitVector::to_f32).collect()),
            text_embedding: r.text_embedding.as_ref().map(UnitVector::to_f32),
        }
    }
}

/// Parses manifest text; line numbers in errors are 1-based.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>, RetrievalError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| RetrievalError::MalformedManifestLine { line: i + 1, reason };
        let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if rec.id.trim().is_empty() {
            return Err(malformed("empty id".into()));
        }
        if rec.thumbnail_refs.is_empty() {
            return Err(malformed("thumbnail_refs is empty".into()));
        }
        if let Some(embs) = &rec.thumbnail_embeddings {
            if embs.len() != rec.thumbnail_refs.len() {
                return Err(malformed(format!(
                    "{} thumbnail embeddings for {} thumbnails",
                    embs.len(),
                    rec.thumbnail_refs.len()
                )));
            }
        }
        if !seen.insert(rec.id.clone()) {
            return Err(RetrievalError::DuplicateAssetId(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}

fn inline_vector(id: &str, raw: &[f32]) -> Result<UnitVector, RetrievalError> {
    UnitVector::from_f32(raw)
        .map(|v| v.quantized())
        .map_err(|e| RetrievalError::InvalidEmbedding {
            id: id.to_string(),
            reason: e.to_string(),
        })
}

pub(crate) fn resolve_ref(base_dir: Option<&Path>, reference: &str) -> PathBuf {
    let p = Path::new(reference);
    match base_dir {
        Some(base) if p.is_relative() => base.join(p),
        _ => p.to_path_buf(),
    }
}

/// Turns parsed records into an index, embedding whatever is missing.
pub fn build_index(
    records: Vec<ManifestRecord>,
    base_dir: Option<&Path>,
    embedder: Option<&Embedder>,
) -> Result<AssetIndex, RetrievalError> {
    let mut assets = Vec::with_capacity(records.len());
    for rec in records {
        let need_embedder = || {
            embedder.ok_or_else(|| RetrievalError::MissingEmbeddingNoProvider { id: rec.id.clone() })
        };
        let thumbnail_embeddings = match &rec.thumbnail_embeddings {
            Some(embs) => embs.iter().map(|e| inline_vector(&rec.id, e)).collect::<Result<Vec<_>, _>>()?,
            None => {
                let emb = need_embedder()?;
                rec.thumbnail_refs
                    .iter()
                    .map(|r| emb.embed_image_path(&resolve_ref(base_dir, r)))
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        let text_embedding = match (&rec.text_embedding, &rec.text_annotation) {
            (Some(e), _) => Some(inline_vector(&rec.id, e)?),
            (None, Some(text)) => Some(need_embedder()?.embed_text(text)?),
            (None, None) => None,
        };
        assets.push(AssetRecord {
            id: rec.id,
            text_annotation: rec.text_annotation,
            thumbnail_refs: rec.thumbnail_refs,
            mesh_ref: rec.mesh_ref,
            source: rec.source,
            thumbnail_embeddings,
            text_embedding,
        });
    }
    let mut index = AssetIndex::from_records(assets)?;
    index.base_dir = base_dir.map(Path::to_path_buf);
    Ok(index)
}

/// Reads and indexes a manifest file.
pub fn ingest_manifest(path: impl AsRef<Path>, embedder: Option<&Embedder>) -> Result<AssetIndex, RetrievalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| RetrievalError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    build_index(parse_manifest(&text)?, Some(&base), embedder)
}

/// Serializes an index back to manifest lines with every embedding inline.
pub fn write_manifest(index: &AssetIndex) -> String {
    let mut out = String::new();
    for r in index.records() {
        out.push_str(&serde_json::to_string(&ManifestRecord::from(r)).expect("manifest record serializes"));
        out.push('\n');
    }
    out
}

/// Fingerprint of an index's contents: ids, refs and embedding bits.
pub fn index_digest(index: &AssetIndex) -> String {
    sha256_hex(write_manifest(index))
}
