#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use curator_cli::server::{self, AppState};
use curator_core::embedding::{Embedder, EmbeddingCache, HashEmbeddingProvider};
use curator_core::pipeline::{Providers, RunSettings};
use curator_core::retrieval::ingest_manifest;
use curator_core::texture::StubTextureProvider;
use curator_core::upsampler::ReplayProvider;

pub const SCENE: &str = "Poseidon's living room";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Runs the `curator` binary against the fixture assets and replay set.
pub fn curator(runs_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curator"))
        .arg("--assets")
        .arg(fixtures().join("assets/manifest.jsonl"))
        .arg("--replay-dir")
        .arg(fixtures().join("replay/poseidon"))
        .arg("--runs-dir")
        .arg(runs_dir)
        .args(args)
        .env_remove("CURATOR_LLM_URL")
        .env_remove("RUST_LOG")
        .output()
        .expect("curator binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The `manifest <path>` line of a run summary.
pub fn manifest_path(out: &Output) -> PathBuf {
    stdout(out)
        .lines()
        .find_map(|l| l.strip_prefix("manifest "))
        .map(PathBuf::from)
        .expect("summary names the manifest")
}

pub fn providers() -> Providers {
    let embedder = Embedder::new(Arc::new(HashEmbeddingProvider::default()), Arc::new(EmbeddingCache::new()));
    let index = ingest_manifest(fixtures().join("assets/manifest.jsonl"), Some(&embedder)).unwrap();
    let replay = ReplayProvider::new(fixtures().join("replay/poseidon")).unwrap();
    Providers::new(embedder, Arc::new(StubTextureProvider), Arc::new(index)).with_completion(Arc::new(replay))
}

/// Starts the session server on an ephemeral port in a background thread.
pub fn spawn_server() -> SocketAddr {
    let state = AppState::new(providers(), RunSettings::default(), None);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let runtime = tokio::runtime::Runtime::new().unwrap();
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            server::serve(listener, state).await.unwrap();
        });
    });
    rx.recv().unwrap()
}
