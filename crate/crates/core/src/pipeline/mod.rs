//! Run orchestration: upsample → retrieve → select → texture → metrics,
//! persisted as a [`RunManifest`], plus editable [`Session`]s over a run.

mod manifest;
mod merge;
mod run;
mod session;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingError, Embedder};
use crate::metrics::{AugmentationStyle, MetricsError};
use crate::provider::ProviderError;
use crate::retrieval::{index_digest, AssetIndex, RetrievalError, RetrievalParams};
use crate::shoplist::{ItemPath, SceneDescription};
use crate::texture::{TextureOptions, TextureProvider};
use crate::upsampler::{CompletionProvider, TemplateSet, UpsampleConfig, UpsampleError};

pub use manifest::{BaselineRecord, ItemRecord, ProviderIds, RunManifest, RunStatus, Selection, Timestamps, MANIFEST_FORMAT};
pub use merge::{merge_lists, MergeMode, MergedList};
pub use run::{collection_metrics, run, write_manifest_file};
pub use session::{apply_edit, ItemUpdate, Patch, Session};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Upsample(#[from] UpsampleError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("no item at path {0}")]
    UnknownItemPath(ItemPath),
    #[error("item {path} has no candidate at rank {rank}")]
    UnknownCandidate { path: ItemPath, rank: usize },
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("stale version {expected}, session is at {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error("asset {0:?} is not in the index")]
    UnknownAsset(String),
    #[error("cannot merge lists: {0}")]
    Merge(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("run {run_id} failed: {source}")]
    RunFailed {
        run_id: String,
        manifest_path: Option<PathBuf>,
        manifest: Box<RunManifest>,
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    /// The error that ended a run, looking through [`PipelineError::RunFailed`].
    pub fn root(&self) -> &PipelineError {
        match self {
            PipelineError::RunFailed { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when a provider could not be reached at all.
    pub fn is_unavailable(&self) -> bool {
        match self.root() {
            PipelineError::Provider(p) => p.is_unavailable(),
            PipelineError::Upsample(UpsampleError::Provider(p)) => p.is_unavailable(),
            PipelineError::Embedding(EmbeddingError::Provider(p)) => p.is_unavailable(),
            PipelineError::Retrieval(RetrievalError::Embedding(EmbeddingError::Provider(p))) => p.is_unavailable(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Full,
    /// No upsampling: the top-K assets for the bare scene description.
    Baseline,
}

/// Provider base URLs recorded with a run. Tokens are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointUrls {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub texture: Option<String>,
}

/// Everything about a run except the scene and mode; this is also the shape
/// of a `--config` file and of the `config` field when opening a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub upsample: UpsampleConfig,
    pub retrieval: RetrievalParams,
    pub auto_select: bool,
    pub augmentation: AugmentationStyle,
    /// Bound on concurrent retrieval and texturing work.
    pub concurrency: usize,
    pub texture_poll_ms: u64,
    pub texture_max_polls: u32,
    pub endpoints: EndpointUrls,
}

impl Default for RunSettings {
    fn default() -> Self {
        let texture = TextureOptions::default();
        Self {
            upsample: UpsampleConfig::default(),
            retrieval: RetrievalParams::default(),
            auto_select: true,
            augmentation: AugmentationStyle::default(),
            concurrency: 4,
            texture_poll_ms: texture.poll_interval.as_millis() as u64,
            texture_max_polls: texture.max_polls,
            endpoints: EndpointUrls::default(),
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.upsample.validate().map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        self.retrieval.validate().map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        if self.concurrency == 0 {
            return Err(PipelineError::InvalidConfig("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    pub fn texture_options(&self) -> TextureOptions {
        TextureOptions {
            concurrency: self.concurrency,
            poll_interval: Duration::from_millis(self.texture_poll_ms),
            max_polls: self.texture_max_polls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneDescription,
    #[serde(default)]
    pub mode: RunMode,
    /// Asset count for baseline runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_k: Option<usize>,
    #[serde(default)]
    pub settings: RunSettings,
}

impl RunConfig {
    /// Builds a config, rejecting an empty scene up front.
    pub fn new(scene: &str, mode: RunMode, settings: RunSettings) -> Result<Self, PipelineError> {
        let scene = SceneDescription::new(scene).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            scene,
            mode,
            baseline_k: None,
            settings,
        })
    }

    pub fn with_baseline_k(mut self, k: usize) -> Self {
        self.baseline_k = Some(k);
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.settings.validate()?;
        match (self.mode, self.baseline_k) {
            (RunMode::Baseline, None) => Err(PipelineError::InvalidConfig("baseline mode needs an asset count K".into())),
            (RunMode::Baseline, Some(0)) => Err(PipelineError::InvalidConfig("baseline K must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// The external services a run talks to, plus the asset index.
#[derive(Clone)]
pub struct Providers {
    /// Needed only for full-mode runs.
    pub completion: Option<Arc<dyn CompletionProvider>>,
    pub embedder: Embedder,
    pub texture: Arc<dyn TextureProvider>,
    pub index: Arc<AssetIndex>,
    pub templates: TemplateSet,
    index_digest: String,
}

impl Providers {
    pub fn new(embedder: Embedder, texture: Arc<dyn TextureProvider>, index: Arc<AssetIndex>) -> Self {
        let index_digest = index_digest(&index);
        Self {
            completion: None,
            embedder,
            texture,
            index,
            templates: TemplateSet::default(),
            index_digest,
        }
    }

    pub fn with_completion(mut self, completion: Arc<dyn CompletionProvider>) -> Self {
        self.completion = Some(completion);
        self
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn index_digest(&self) -> &str {
        &self.index_digest
    }

    pub fn ids(&self) -> ProviderIds {
        ProviderIds {
            completion: self.completion.as_ref().map(|c| c.provider_id().to_string()),
            embedding: self.embedder.provider_id().to_string(),
            texture: self.texture.provider_id().to_string(),
            index_digest: self.index_digest.clone(),
        }
    }
}
