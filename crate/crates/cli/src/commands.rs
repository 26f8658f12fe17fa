use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use curator_core::metrics::{
    classify, embed_scene_augmentations, AssetViews, ClassificationReport, MetricsReport, Prediction, ReportFormat,
};
use curator_core::pipeline::{self, merge_lists, MergeMode, PipelineError, RunConfig, RunManifest, RunMode, RunSettings};
use curator_core::retrieval::{top_k, write_manifest, RankedCandidate};
use curator_core::shoplist::{build_query_string, read_list_file, serialize_human, write_list_file, ItemPath, SceneDescription};
use curator_core::upsampler::{script_for_list, upsample_with_templates, write_exchange, TemplateSet};
use serde::Serialize;

use crate::args::{Cli, Command, GlobalArgs, MergeModeArg, OutputFormat};
use crate::{server, setup};

pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match cli.command {
        Command::Upsample { scene, out, json } => upsample(g, &scene, out.as_deref(), json),
        Command::Retrieve { list, format } => retrieve(g, &list, format),
        Command::Run { scene, no_auto_select } => {
            let mut settings = setup::settings(g, true)?;
            settings.auto_select &= !no_auto_select;
            let config = RunConfig::new(&scene, RunMode::Full, settings)?;
            execute(g, &config, true)
        }
        Command::Baseline { scene, reference_run } => baseline(g, &scene, reference_run.as_deref()),
        Command::Metrics { manifests, format, classify } => metrics(g, &manifests, format, classify),
        Command::Serve { port, host } => serve(g, &host, port),
        Command::MergeLists { a, b, mode, out } => merge(&a, &b, mode, out.as_deref()),
        Command::SynthReplay { list, out } => synth_replay(g, &list, &out),
        Command::Index { manifest, out } => index(g, &manifest, &out),
    }
}

fn upsample(g: &GlobalArgs, scene: &str, out: Option<&Path>, json: bool) -> Result<ExitCode> {
    let settings = setup::settings(g, true)?;
    let scene = SceneDescription::new(scene)?;
    let provider = setup::completion(g)?;
    let list = upsample_with_templates(&scene, provider.as_ref(), &TemplateSet::default(), &settings.upsample)?;
    for w in &list.provenance.warnings {
        eprintln!("warning: {w}");
    }
    let text = if json {
        serde_json::to_string_pretty(&list)? + "\n"
    } else {
        serialize_human(&list)?
    };
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ItemRanking {
    path: ItemPath,
    category: String,
    query: String,
    candidates: Vec<RankedCandidate>,
}

fn retrieve(g: &GlobalArgs, list_path: &Path, format: OutputFormat) -> Result<ExitCode> {
    let settings = setup::settings(g, true)?;
    let list = read_list_file(list_path)?;
    let providers = setup::providers(g, false)?;
    let mut rankings = Vec::new();
    for (path, item) in list.flatten_with_paths() {
        let query = build_query_string(item, &list.scene);
        let candidates = top_k(&providers.index, &providers.embedder, &query, settings.retrieval)?;
        rankings.push(ItemRanking {
            path,
            category: item.category.clone(),
            query: query.as_str().to_string(),
            candidates,
        });
    }
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&rankings)?),
        OutputFormat::Csv => {
            println!("path,category,rank,asset_id,score,image_score,text_score");
            for r in &rankings {
                for (i, c) in r.candidates.iter().enumerate() {
                    let text = c.text_score.map(|t| t.to_string()).unwrap_or_default();
                    println!("{},\"{}\",{},{},{},{},{}", r.path, r.category.replace('"', "\"\""), i + 1, c.asset_id, c.score, c.image_score, text);
                }
            }
        }
        OutputFormat::Text => {
            let mut out = String::new();
            for r in &rankings {
                let _ = writeln!(out, "{} {}\n  query: {}", r.path, r.category, r.query);
                for (i, c) in r.candidates.iter().enumerate() {
                    let text = c.text_score.map_or_else(|| "-".into(), |t| format!("{t:.4}"));
                    let _ = writeln!(out, "  {:>2}. {:<24} {:.4}  (image {:.4}, text {text})", i + 1, c.asset_id, c.score, c.image_score);
                }
            }
            print!("{out}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn baseline(g: &GlobalArgs, scene: &str, reference: Option<&Path>) -> Result<ExitCode> {
    let k = match (reference, g.k) {
        (Some(path), _) => {
            let reference = RunManifest::load(path)?;
            if reference.shopping_list.is_none() {
                bail!("{} is not a full-mode run", path.display());
            }
            reference.items.len()
        }
        (None, Some(k)) => k,
        (None, None) => bail!("baseline needs --k or --reference-run"),
    };
    let settings = setup::settings(g, false)?;
    let config = RunConfig::new(scene, RunMode::Baseline, settings)?.with_baseline_k(k);
    execute(g, &config, false)
}

fn execute(g: &GlobalArgs, config: &RunConfig, with_completion: bool) -> Result<ExitCode> {
    config.validate()?;
    let providers = setup::providers(g, with_completion)?;
    match pipeline::run(config, &providers, Some(&g.runs_dir)) {
        Ok(manifest) => {
            print_summary(&manifest, &g.runs_dir);
            Ok(ExitCode::SUCCESS)
        }
        Err(PipelineError::RunFailed {
            run_id,
            manifest_path,
            source,
            ..
        }) => {
            eprintln!("error: run {run_id} failed: {source}");
            if let Some(p) = manifest_path {
                eprintln!("partial manifest: {}", p.display());
            }
            Ok(ExitCode::FAILURE)
        }
        Err(e) => Err(e.into()),
    }
}

fn print_summary(manifest: &RunManifest, runs_dir: &Path) {
    println!("run {}", manifest.run_id);
    println!("manifest {}", runs_dir.join(format!("{}.json", manifest.run_id)).display());
    match &manifest.baseline {
        Some(b) => println!("baseline: {} assets for {:?}", b.candidates.len(), b.query.as_str()),
        None => {
            let selected = manifest.items.iter().filter(|r| r.selection.is_some()).count();
            let unfulfilled = manifest.items.iter().filter(|r| r.unfulfilled.is_some()).count();
            println!("items {}  selected {selected}  unfulfilled {unfulfilled}", manifest.items.len());
        }
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
    if let Some(m) = &manifest.metrics {
        print!("\n{}", m.render(ReportFormat::Text));
    }
}

fn metrics(g: &GlobalArgs, paths: &[std::path::PathBuf], format: OutputFormat, with_classification: bool) -> Result<ExitCode> {
    let manifests = paths.iter().map(RunManifest::load).collect::<Result<Vec<_>, _>>()?;
    let mut report = MetricsReport::default();
    for m in &manifests {
        match &m.metrics {
            Some(metrics) => report.collections.extend(metrics.collections.iter().cloned().map(|mut c| {
                c.label = format!("{} {}", c.label, &m.run_id[..m.run_id.len().min(8)]);
                c
            })),
            None => eprintln!("warning: run {} has no metrics", m.run_id),
        }
    }
    if with_classification {
        report.classification = Some(classification(g, &manifests)?);
    }
    let format = match format {
        OutputFormat::Text => ReportFormat::Text,
        OutputFormat::Json => ReportFormat::Json,
        OutputFormat::Csv => ReportFormat::Csv,
    };
    print!("{}", report.render(format));
    Ok(ExitCode::SUCCESS)
}

/// Classifies every selected asset of every run among the runs' scenes.
fn classification(g: &GlobalArgs, manifests: &[RunManifest]) -> Result<ClassificationReport> {
    let providers = setup::providers(g, false)?;
    let mut scenes: Vec<SceneDescription> = Vec::new();
    for m in manifests {
        if !scenes.contains(&m.config.scene) {
            scenes.push(m.config.scene.clone());
        }
    }
    let style = manifests.first().map(|m| m.config.settings.augmentation).unwrap_or_default();
    let embedded = embed_scene_augmentations(&scenes, &providers.embedder, style)?;
    let mut predictions = Vec::new();
    for m in manifests {
        for id in m.selected_assets() {
            let asset = providers
                .index
                .get(id)
                .with_context(|| format!("run {} selects {id:?}, which is not in the asset index", m.run_id))?;
            let views = AssetViews::new(id, asset.thumbnail_embeddings.clone())?;
            let predicted = classify(&views, &embedded)?;
            predictions.push(Prediction {
                asset_id: id.to_string(),
                true_scene: m.config.scene.to_string(),
                predicted_scene: scenes[predicted].to_string(),
            });
        }
    }
    Ok(ClassificationReport::from_predictions(predictions))
}

fn serve(g: &GlobalArgs, host: &str, port: u16) -> Result<ExitCode> {
    let settings = setup::settings(g, true)?;
    let providers = setup::providers(g, true)?;
    let state = server::AppState::new(providers, settings, Some(g.runs_dir.clone()));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        println!("listening on http://{}", listener.local_addr()?);
        server::serve(listener, state).await
    })?;
    Ok(ExitCode::SUCCESS)
}

fn merge(a: &Path, b: &Path, mode: MergeModeArg, out: Option<&Path>) -> Result<ExitCode> {
    let mode = match mode {
        MergeModeArg::Union => MergeMode::Union,
        MergeModeArg::Intersection => MergeMode::Intersection,
    };
    let merged = merge_lists(&read_list_file(a)?, &read_list_file(b)?, mode)?;
    for w in &merged.warnings {
        eprintln!("warning: {w}");
    }
    match out {
        Some(path) => write_list_file(path, &merged.list)?,
        None => print!("{}", serialize_human(&merged.list)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn synth_replay(g: &GlobalArgs, list_path: &Path, out: &Path) -> Result<ExitCode> {
    let list = read_list_file(list_path)?;
    let max_depth = g.max_depth.unwrap_or(RunSettings::default().upsample.max_depth);
    let script = script_for_list(&list, &TemplateSet::default(), max_depth)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (prompt, completion) in &script {
        write_exchange(out, prompt, completion)?;
    }
    println!("wrote {} exchanges to {}", script.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn index(g: &GlobalArgs, manifest: &Path, out: &Path) -> Result<ExitCode> {
    let embedder = setup::embedder(g)?;
    let index = setup::load_index(manifest, &embedder)?;
    fs::write(out, write_manifest(&index)).with_context(|| format!("writing {}", out.display()))?;
    println!("indexed {} assets ({} new embeddings) into {}", index.len(), embedder.cache().len(), out.display());
    Ok(ExitCode::SUCCESS)
}
