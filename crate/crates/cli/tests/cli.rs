mod common;

use std::collections::BTreeMap;
use std::fs;

use common::{curator, fixtures, manifest_path, stdout, SCENE};
use curator_core::pipeline::{RunManifest, RunStatus};
use curator_core::shoplist::{parse_list_document, read_list_file};

#[test]
fn run_twice_gives_identical_manifests() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = curator(a.path(), &["run", SCENE]);
    let second = curator(b.path(), &["run", SCENE]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(second.status.success());
    let ma = RunManifest::load(manifest_path(&first)).unwrap();
    let mb = RunManifest::load(manifest_path(&second)).unwrap();
    assert_eq!(ma.status, RunStatus::Completed);
    assert_eq!(ma.items.len(), 27);
    assert_eq!(ma.canonical_json(), mb.canonical_json());
    assert!(stdout(&first).contains("items 27  selected 27  unfulfilled 0"));
}

#[test]
fn baseline_matches_the_reference_run_size() {
    let dir = tempfile::tempdir().unwrap();
    let full = curator(dir.path(), &["run", SCENE]);
    let reference = manifest_path(&full);
    let out = curator(dir.path(), &["baseline", SCENE, "--reference-run", reference.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let baseline = RunManifest::load(manifest_path(&out)).unwrap();
    assert!(baseline.shopping_list.is_none());
    assert_eq!(baseline.baseline.as_ref().unwrap().k, 27);
    assert_eq!(baseline.baseline.as_ref().unwrap().candidates.len(), 12);
    assert!(baseline.prompts().iter().all(|p| *p == SCENE));

    let metrics = curator(
        dir.path(),
        &["metrics", reference.to_str().unwrap(), manifest_path(&out).to_str().unwrap(), "--format", "csv"],
    );
    assert!(metrics.status.success());
    let text = stdout(&metrics);
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[0].starts_with("label,"), "{text}");
    assert!(rows.iter().any(|r| r.starts_with("\"ours ")));
    assert!(rows.iter().any(|r| r.starts_with("\"baseline ")));
}

#[test]
fn upsample_from_replay_reproduces_the_fixture_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = curator(dir.path(), &["upsample", SCENE]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let got = parse_list_document(&stdout(&out)).unwrap();
    let want = read_list_file(fixtures().join("shopping_lists/poseidon_living_room.txt")).unwrap();
    assert_eq!(got.scene, want.scene);
    assert_eq!(got.anchors, want.anchors);
}

#[test]
fn synth_replay_regenerates_the_recorded_exchanges() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("replay");
    let list = fixtures().join("shopping_lists/poseidon_living_room.txt");
    let out = curator(dir.path(), &["synth-replay", list.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let read = |d: &std::path::Path| -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap())
            .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
            .collect()
    };
    assert_eq!(read(&out_dir), read(&fixtures().join("replay/poseidon")));
}

#[test]
fn empty_scene_exits_nonzero_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = curator(dir.path(), &["run", "   "]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!dir.path().exists() || fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn replay_miss_leaves_a_failed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = curator(dir.path(), &["run", "a lighthouse keeper's kitchen"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let path = stderr
        .lines()
        .find_map(|l| l.strip_prefix("partial manifest: "))
        .expect("partial manifest reported");
    assert_eq!(RunManifest::load(path).unwrap().status, RunStatus::Failed);
}
