use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig};
use crate::metrics::MetricsReport;
use crate::retrieval::{RankedCandidate, RetrievalParams};
use crate::shoplist::{ItemPath, QueryString, ShoppingList};
use crate::texture::TextureJob;

pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderIds {
    pub completion: Option<String>,
    pub embedding: String,
    pub texture: String,
    /// Hash of the asset index the run retrieved from.
    pub index_digest: String,
}

/// A chosen candidate; `rank` is 1-based into the item's candidate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub rank: usize,
    pub asset_id: String,
}

/// Retrieval, selection and texturing state of one shopping-list item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub path: ItemPath,
    pub category: String,
    pub count: u32,
    pub query: QueryString,
    /// Per-item override of the run's retrieval parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalParams>,
    pub candidates: Vec<RankedCandidate>,
    pub selection: Option<Selection>,
    pub texture: Option<TextureJob>,
    /// Why the item has no candidates, if it has none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unfulfilled: Option<String>,
    /// The item changed since `candidates` was computed.
    #[serde(default)]
    pub ranking_stale: bool,
    /// The selection changed since `texture` was produced.
    #[serde(default)]
    pub texture_stale: bool,
}

/// Output of a baseline run: top-K assets for the bare scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub k: usize,
    pub query: QueryString,
    pub candidates: Vec<RankedCandidate>,
    pub textures: Vec<TextureJob>,
}

/// Wall-clock times in milliseconds since the Unix epoch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_at_ms: u64,
    pub finished_at_ms: Option<u64>,
}

/// Persisted record of one pipeline execution.
///
/// Apart from `timestamps`, the serialized form is a pure function of the
/// config, the provider outputs and the asset index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub run_id: String,
    pub status: RunStatus,
    pub config: RunConfig,
    pub providers: ProviderIds,
    pub shopping_list: Option<ShoppingList>,
    pub items: Vec<ItemRecord>,
    pub baseline: Option<BaselineRecord>,
    pub metrics: Option<MetricsReport>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub timestamps: Timestamps,
}

impl RunManifest {
    pub fn item(&self, path: &ItemPath) -> Option<&ItemRecord> {
        self.items.iter().find(|r| &r.path == path)
    }

    pub fn item_mut(&mut self, path: &ItemPath) -> Option<&mut ItemRecord> {
        self.items.iter_mut().find(|r| &r.path == path)
    }

    /// Selected asset ids in item order (or all baseline candidates).
    pub fn selected_assets(&self) -> Vec<&str> {
        match &self.baseline {
            Some(b) => b.candidates.iter().map(|c| c.asset_id.as_str()).collect(),
            None => self
                .items
                .iter()
                .filter_map(|r| r.selection.as_ref().map(|s| s.asset_id.as_str()))
                .collect(),
        }
    }

    /// Every prompt the run sent to a provider: upsampling prompts, then
    /// retrieval queries and texturing prompts.
    pub fn prompts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        if let Some(list) = &self.shopping_list {
            out.extend(list.provenance.prompts.iter().map(|p| p.prompt.as_str()));
        }
        for r in &self.items {
            out.push(r.query.as_str());
            out.extend(r.texture.iter().map(|t| t.prompt.as_str()));
        }
        if let Some(b) = &self.baseline {
            out.push(b.query.as_str());
            out.extend(b.textures.iter().map(|t| t.prompt.as_str()));
        }
        out
    }

    /// Checks that every selection names the candidate at its rank.
    pub fn check_selections(&self) -> Result<(), String> {
        for r in &self.items {
            if let Some(sel) = &r.selection {
                let ok = sel
                    .rank
                    .checked_sub(1)
                    .and_then(|i| r.candidates.get(i))
                    .is_some_and(|c| c.asset_id == sel.asset_id);
                if !ok {
                    return Err(format!("item {}: selection {:?} is not among its candidates", r.path, sel));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Serialized form without `timestamps`, for golden comparisons.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("timestamps");
        }
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let io = |reason: String| PipelineError::Io {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| io(e.to_string()))
    }
}
