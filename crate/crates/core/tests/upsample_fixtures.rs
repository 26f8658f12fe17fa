//! Every transcribed list survives a trip through the upsampler when the
//! completion model is scripted to answer with that list's own lines.

use std::collections::HashMap;
use std::path::PathBuf;

use curator_core::provider::ProviderError;
use curator_core::shoplist::read_list_file;
use curator_core::upsampler::{prompt_key, script_for_list, upsample, CompletionProvider, SamplingParams, TemplateSet, UpsampleConfig};

struct Table(HashMap<String, String>);

impl CompletionProvider for Table {
    fn provider_id(&self) -> &str {
        "table"
    }
    fn complete(&self, prompt: &str, _: &SamplingParams) -> Result<String, ProviderError> {
        self.0.get(prompt).cloned().ok_or_else(|| ProviderError::ReplayMiss { key: prompt_key(prompt) })
    }
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/shopping_lists")
}

#[test]
fn scripted_upsampling_reproduces_every_fixture() {
    let mut checked = 0;
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let list = read_list_file(&path).unwrap();
        let script = script_for_list(&list, &TemplateSet::default(), 1).unwrap();
        let mut table = HashMap::new();
        for (prompt, completion) in script {
            if let Some(prev) = table.insert(prompt, completion.clone()) {
                assert_eq!(prev, completion, "{}: one prompt needs two different completions", path.display());
            }
        }
        let out = upsample(&list.scene, &Table(table), &UpsampleConfig::default()).unwrap();
        assert!(out.structurally_eq(&list), "{}", path.display());
        assert!(out.provenance.warnings.is_empty(), "{}: {:?}", path.display(), out.provenance.warnings);
        checked += 1;
    }
    assert_eq!(checked, 21);
}
