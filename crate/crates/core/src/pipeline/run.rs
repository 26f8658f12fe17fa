use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use tracing::{info, warn};

use super::{
    BaselineRecord, ItemRecord, PipelineError, Providers, RunConfig, RunManifest, RunMode, RunStatus, Selection,
    Timestamps, MANIFEST_FORMAT,
};
use crate::embedding::EmbeddingError;
use crate::metrics::{augmentations, baseline_select, AssetViews, AugmentationStyle, CollectionMetrics, MetricsReport};
use crate::par::map_bounded;
use crate::provider::sha256_hex;
use crate::retrieval::{top_k, RankedCandidate, RetrievalError};
use crate::shoplist::{build_query_string, SceneDescription};
use crate::texture::{baseline_texture_prompt, make_texture_prompt, texture_all, TextureRequest};
use crate::upsampler::upsample_with_templates;

pub(super) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Content address of a run: same config, providers, templates and index
/// give the same id.
fn run_id(config: &RunConfig, providers: &Providers) -> String {
    let material = serde_json::json!({
        "config": config,
        "providers": providers.ids(),
        "templates": providers.templates,
    });
    sha256_hex(material.to_string())[..16].to_string()
}

/// Executes one run and persists its manifest under `runs_dir`.
///
/// Config problems are reported before any provider is called. Once the run
/// has started, a fatal error still persists the partial manifest with
/// `status: failed` and is returned as [`PipelineError::RunFailed`].
pub fn run(config: &RunConfig, providers: &Providers, runs_dir: Option<&Path>) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    if config.mode == RunMode::Full && providers.completion.is_none() {
        return Err(PipelineError::InvalidConfig("full mode needs a completion provider".into()));
    }
    let mut manifest = RunManifest {
        format: MANIFEST_FORMAT,
        run_id: run_id(config, providers),
        status: RunStatus::Running,
        config: config.clone(),
        providers: providers.ids(),
        shopping_list: None,
        items: Vec::new(),
        baseline: None,
        metrics: None,
        warnings: Vec::new(),
        error: None,
        timestamps: Timestamps {
            started_at_ms: now_ms(),
            finished_at_ms: None,
        },
    };
    info!(run_id = %manifest.run_id, mode = ?config.mode, scene = %config.scene, "run started");
    let outcome = match config.mode {
        RunMode::Full => run_full(&mut manifest, providers),
        RunMode::Baseline => run_baseline(&mut manifest, providers),
    };
    manifest.timestamps.finished_at_ms = Some(now_ms());
    match outcome {
        Ok(()) => {
            manifest.status = RunStatus::Completed;
            if let Some(dir) = runs_dir {
                write_manifest_file(dir, &manifest)?;
            }
            info!(run_id = %manifest.run_id, items = manifest.items.len(), "run completed");
            Ok(manifest)
        }
        Err(e) => {
            warn!(run_id = %manifest.run_id, error = %e, "run failed");
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            let manifest_path = match runs_dir {
                Some(dir) => Some(write_manifest_file(dir, &manifest)?),
                None => None,
            };
            Err(PipelineError::RunFailed {
                run_id: manifest.run_id.clone(),
                manifest_path,
                manifest: Box::new(manifest),
                source: Box::new(e),
            })
        }
    }
}

/// Writes `<dir>/<run_id>.json` atomically and returns its path.
pub fn write_manifest_file(dir: &Path, manifest: &RunManifest) -> Result<PathBuf, PipelineError> {
    let io = |p: &Path, e: std::io::Error| PipelineError::Io {
        path: p.display().to_string(),
        reason: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(format!("{}.json", manifest.run_id));
    let tmp = dir.join(format!(".{}.json.tmp", manifest.run_id));
    fs::write(&tmp, manifest.to_json()).map_err(|e| io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn run_full(manifest: &mut RunManifest, providers: &Providers) -> Result<(), PipelineError> {
    let config = manifest.config.clone();
    let settings = &config.settings;
    let completion = providers.completion.as_deref().expect("checked by run");
    let list = upsample_with_templates(&config.scene, completion, &providers.templates, &settings.upsample)?;
    manifest.warnings.extend(list.provenance.warnings.iter().cloned());
    manifest.items = list
        .flatten_with_paths()
        .into_iter()
        .map(|(path, item)| ItemRecord {
            path,
            category: item.category.clone(),
            count: item.count,
            query: build_query_string(item, &list.scene),
            retrieval: None,
            candidates: Vec::new(),
            selection: None,
            texture: None,
            unfulfilled: None,
            ranking_stale: false,
            texture_stale: false,
        })
        .collect();
    manifest.shopping_list = Some(list);

    if providers.index.is_empty() {
        return Err(RetrievalError::EmptyIndex.into());
    }
    let ranked = map_bounded(&manifest.items, settings.concurrency, |_, r| {
        top_k(&providers.index, &providers.embedder, &r.query, settings.retrieval)
    });
    for (record, result) in manifest.items.iter_mut().zip(ranked) {
        match result {
            Ok(candidates) => record.candidates = candidates,
            Err(e) if retrieval_is_fatal(&e) => return Err(e.into()),
            Err(e) => {
                warn!(path = %record.path, error = %e, "item unfulfilled");
                record.unfulfilled = Some(e.to_string());
            }
        }
        if record.candidates.is_empty() && record.unfulfilled.is_none() {
            record.unfulfilled = Some("no candidates".into());
        }
        if settings.auto_select {
            record.selection = record.candidates.first().map(|c| Selection {
                rank: 1,
                asset_id: c.asset_id.clone(),
            });
        }
    }

    texture_items(manifest, providers, None)?;
    manifest.metrics = selection_metrics(manifest, providers, "ours")?;
    Ok(())
}

/// Submits texture jobs for the selected items (all of them, or only `only`).
pub(super) fn texture_items(
    manifest: &mut RunManifest,
    providers: &Providers,
    only: Option<&crate::shoplist::ItemPath>,
) -> Result<(), PipelineError> {
    let list = manifest.shopping_list.as_ref().expect("full-mode manifest has a list");
    let mut targets = Vec::new();
    let mut requests = Vec::new();
    for (i, record) in manifest.items.iter().enumerate() {
        if only.is_some_and(|p| p != &record.path) {
            continue;
        }
        let (Some(sel), Some(item)) = (&record.selection, list.get(&record.path)) else {
            continue;
        };
        let Some(asset) = providers.index.get(&sel.asset_id) else {
            return Err(PipelineError::UnknownAsset(sel.asset_id.clone()));
        };
        targets.push(i);
        requests.push(TextureRequest {
            asset_id: asset.id.clone(),
            mesh_ref: asset.mesh_ref.clone(),
            prompt: make_texture_prompt(item, &list.scene),
        });
    }
    let jobs = texture_all(&requests, providers.texture.as_ref(), &manifest.config.settings.texture_options())?;
    for (i, job) in targets.into_iter().zip(jobs) {
        manifest.items[i].texture = Some(job);
        manifest.items[i].texture_stale = false;
    }
    Ok(())
}

fn run_baseline(manifest: &mut RunManifest, providers: &Providers) -> Result<(), PipelineError> {
    let config = manifest.config.clone();
    let k = config.baseline_k.expect("validated");
    let scene = &config.scene;
    if providers.index.is_empty() {
        return Err(RetrievalError::EmptyIndex.into());
    }
    let candidates = baseline_select(&providers.index, &providers.embedder, scene, k, config.settings.retrieval.w)?;
    if candidates.len() < k {
        manifest
            .warnings
            .push(format!("baseline asked for {k} assets, index holds only {}", candidates.len()));
    }
    let requests = candidates
        .iter()
        .map(|c| {
            let asset = providers.index.get(&c.asset_id).expect("ranked asset is indexed");
            TextureRequest {
                asset_id: asset.id.clone(),
                mesh_ref: asset.mesh_ref.clone(),
                prompt: baseline_texture_prompt(scene),
            }
        })
        .collect::<Vec<_>>();
    let textures = texture_all(&requests, providers.texture.as_ref(), &config.settings.texture_options())?;
    manifest.baseline = Some(BaselineRecord {
        k,
        query: crate::shoplist::QueryString::bare(scene),
        candidates,
        textures,
    });
    manifest.metrics = selection_metrics(manifest, providers, "baseline")?;
    Ok(())
}

fn retrieval_is_fatal(e: &RetrievalError) -> bool {
    match e {
        RetrievalError::EmptyIndex => true,
        RetrievalError::Embedding(EmbeddingError::Provider(p)) => p.is_unavailable(),
        _ => false,
    }
}

/// Metrics over the manifest's selected assets, or `None` (with a warning)
/// when nothing is selected.
pub(super) fn selection_metrics(
    manifest: &mut RunManifest,
    providers: &Providers,
    label: &str,
) -> Result<Option<MetricsReport>, PipelineError> {
    let ids: Vec<String> = manifest.selected_assets().into_iter().map(str::to_string).collect();
    if ids.is_empty() {
        manifest.warnings.push("no assets selected; metrics skipped".into());
        return Ok(None);
    }
    let collection = collection_metrics(label, &manifest.config.scene, &ids, providers, manifest.config.settings.augmentation)?;
    Ok(Some(MetricsReport {
        collections: vec![collection],
        classification: None,
        retexture: None,
    }))
}

/// CLIP-S/CLIP-D/CLIP-D/S of the given assets against the scene's
/// augmentation set, using each asset's thumbnail embeddings as its views.
pub fn collection_metrics(
    label: &str,
    scene: &SceneDescription,
    asset_ids: &[String],
    providers: &Providers,
    style: AugmentationStyle,
) -> Result<CollectionMetrics, PipelineError> {
    let views = asset_ids
        .iter()
        .map(|id| {
            let asset = providers
                .index
                .get(id)
                .ok_or_else(|| PipelineError::UnknownAsset(id.clone()))?;
            Ok(AssetViews::new(id.clone(), asset.thumbnail_embeddings.clone())?)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let utterances = augmentations(scene, style).embed(&providers.embedder)?;
    Ok(CollectionMetrics::compute(label, scene.as_str(), &views, &utterances)?)
}

/// Top candidates for one item's query with its effective parameters.
pub(super) fn retrieve_record(record: &ItemRecord, manifest: &RunManifest, providers: &Providers) -> Result<Vec<RankedCandidate>, RetrievalError> {
    let params = record.retrieval.unwrap_or(manifest.config.settings.retrieval);
    top_k(&providers.index, &providers.embedder, &record.query, params)
}
