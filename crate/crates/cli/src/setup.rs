//! Turns global flags and environment into settings and providers.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use curator_core::embedding::{Embedder, EmbeddingCache, EmbeddingProvider, HashEmbeddingProvider, HttpEmbeddingProvider};
use curator_core::pipeline::{Providers, RunSettings};
use curator_core::retrieval::{ingest_manifest, AssetIndex};
use curator_core::texture::{HttpTextureProvider, StubTextureProvider, TextureProvider};
use curator_core::upsampler::{CompletionProvider, HttpCompletionProvider, RecordingProvider, ReplayProvider};

use crate::args::{EmbedderKind, GlobalArgs, TextureKind};

/// Settings from `--config` (or defaults) with flag overrides applied.
pub fn settings(global: &GlobalArgs, k_is_retrieval: bool) -> Result<RunSettings> {
    let mut settings = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunSettings::default(),
    };
    if let Some(w) = global.w {
        settings.retrieval.w = w;
    }
    if let (Some(k), true) = (global.k, k_is_retrieval) {
        settings.retrieval.k = k;
    }
    if let Some(d) = global.max_depth {
        settings.upsample.max_depth = d;
    }
    if global.replay_dir.is_none() || global.record {
        settings.endpoints.llm = std::env::var(HttpCompletionProvider::URL_VAR).ok();
    }
    if global.embedder == EmbedderKind::Http {
        settings.endpoints.embedding = std::env::var(HttpEmbeddingProvider::URL_VAR).ok();
    }
    if global.texture == TextureKind::Http {
        settings.endpoints.texture = std::env::var(HttpTextureProvider::URL_VAR).ok();
    }
    settings.validate()?;
    Ok(settings)
}

pub fn completion(global: &GlobalArgs) -> Result<Arc<dyn CompletionProvider>> {
    let live = || {
        HttpCompletionProvider::from_env()
            .ok_or_else(|| anyhow!("no completion service: set {} or pass --replay-dir", HttpCompletionProvider::URL_VAR))
    };
    Ok(match (&global.replay_dir, global.record) {
        (Some(dir), true) => Arc::new(RecordingProvider::new(live()?, dir)?),
        (Some(dir), false) => Arc::new(ReplayProvider::new(dir)?),
        (None, _) => Arc::new(live()?),
    })
}

pub fn embedder(global: &GlobalArgs) -> Result<Embedder> {
    let provider: Arc<dyn EmbeddingProvider> = match global.embedder {
        EmbedderKind::Hash => {
            if global.hash_dim == 0 {
                bail!("--hash-dim must be at least 1");
            }
            Arc::new(HashEmbeddingProvider::new(global.hash_dim))
        }
        EmbedderKind::Http => Arc::new(
            HttpEmbeddingProvider::from_env()
                .ok_or_else(|| anyhow!("--embedder http needs {}", HttpEmbeddingProvider::URL_VAR))?,
        ),
    };
    let cache = match &global.cache_dir {
        Some(dir) => EmbeddingCache::with_dir(dir),
        None => EmbeddingCache::new(),
    };
    Ok(Embedder::new(provider, Arc::new(cache)))
}

pub fn texture(global: &GlobalArgs) -> Result<Arc<dyn TextureProvider>> {
    Ok(match global.texture {
        TextureKind::Stub => Arc::new(StubTextureProvider),
        TextureKind::Http => Arc::new(
            HttpTextureProvider::from_env().ok_or_else(|| anyhow!("--texture http needs {}", HttpTextureProvider::URL_VAR))?,
        ),
    })
}

pub fn index(global: &GlobalArgs, embedder: &Embedder) -> Result<AssetIndex> {
    let path = global
        .assets
        .as_deref()
        .ok_or_else(|| anyhow!("no asset manifest: pass --assets or set CURATOR_ASSETS"))?;
    load_index(path, embedder)
}

pub fn load_index(path: &Path, embedder: &Embedder) -> Result<AssetIndex> {
    let index = ingest_manifest(path, Some(embedder)).with_context(|| format!("loading assets from {}", path.display()))?;
    tracing::info!(assets = index.len(), dim = index.dimension(), "asset index loaded");
    Ok(index)
}

/// Everything a run needs; the completion provider only when asked for.
pub fn providers(global: &GlobalArgs, with_completion: bool) -> Result<Providers> {
    let embedder = embedder(global)?;
    let index = index(global, &embedder)?;
    let providers = Providers::new(embedder, texture(global)?, Arc::new(index));
    Ok(if with_completion {
        providers.with_completion(completion(global)?)
    } else {
        providers
    })
}
