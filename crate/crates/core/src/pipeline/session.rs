use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::run::{retrieve_record, selection_metrics, texture_items};
use super::{ItemRecord, PipelineError, Providers, RunManifest, Selection};
use crate::retrieval::RetrievalParams;
use crate::shoplist::{build_query_string, ItemPath, ShoppingItem, ShoppingList, MAX_ANCHORS};

/// Field changes for one item; absent fields are left alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItemUpdate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Vec<String>>,
}

/// One edit to a session's manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Patch {
    UpdateItem { path: ItemPath, update: ItemUpdate },
    /// Removes the item and its subtree; later siblings shift down by one.
    DeleteItem { path: ItemPath },
    /// Appends `item` (with any children) under `parent`, or as a new anchor.
    AddItem {
        #[serde(default)]
        parent: Option<ItemPath>,
        item: ShoppingItem,
    },
    /// Chooses the candidate at 1-based `rank`.
    Select { path: ItemPath, rank: usize },
    SetRetrievalParams { path: ItemPath, params: RetrievalParams },
    /// Recomputes the item's candidates from its current query.
    Retrieve { path: ItemPath },
    Retexture { path: ItemPath },
    RecomputeMetrics,
}

/// An editable run. `manifest` always equals `initial` with `history`
/// applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    /// Incremented by every accepted edit.
    pub version: u64,
    pub initial: RunManifest,
    pub manifest: RunManifest,
    pub history: Vec<Patch>,
}

impl Session {
    pub fn new(id: impl Into<String>, manifest: RunManifest) -> Self {
        Self {
            id: id.into(),
            version: 1,
            initial: manifest.clone(),
            manifest,
            history: Vec::new(),
        }
    }

    /// Applies `patch` if `expected_version` matches the current version and
    /// returns the new version. A rejected edit leaves the session untouched.
    pub fn apply(&mut self, patch: Patch, expected_version: u64, providers: &Providers) -> Result<u64, PipelineError> {
        if expected_version != self.version {
            return Err(PipelineError::VersionConflict {
                expected: expected_version,
                current: self.version,
            });
        }
        self.manifest = apply_edit(&self.manifest, &patch, providers)?;
        self.history.push(patch);
        self.version += 1;
        Ok(self.version)
    }

    /// Re-applies the history to the initial manifest.
    pub fn replay(&self, providers: &Providers) -> Result<RunManifest, PipelineError> {
        self.history
            .iter()
            .try_fold(self.initial.clone(), |m, patch| apply_edit(&m, patch, providers))
    }
}

/// Returns `manifest` with `patch` applied.
pub fn apply_edit(manifest: &RunManifest, patch: &Patch, providers: &Providers) -> Result<RunManifest, PipelineError> {
    debug!(?patch, "applying edit");
    let mut next = manifest.clone();
    match patch {
        Patch::UpdateItem { path, update } => update_item(&mut next, path, update)?,
        Patch::DeleteItem { path } => delete_item(&mut next, path)?,
        Patch::AddItem { parent, item } => add_item(&mut next, parent.as_ref(), item)?,
        Patch::Select { path, rank } => select(&mut next, path, *rank)?,
        Patch::SetRetrievalParams { path, params } => {
            params.validate().map_err(|e| PipelineError::InvalidEdit(e.to_string()))?;
            let record = record_mut(&mut next, path)?;
            record.retrieval = Some(*params);
            record.ranking_stale = true;
        }
        Patch::Retrieve { path } => retrieve(&mut next, path, providers)?,
        Patch::Retexture { path } => {
            if record_mut(&mut next, path)?.selection.is_none() {
                return Err(PipelineError::InvalidEdit(format!("item {path} has no selection to texture")));
            }
            texture_items(&mut next, providers, Some(path))?;
        }
        Patch::RecomputeMetrics => {
            let label = if next.baseline.is_some() { "baseline" } else { "ours" };
            next.metrics = selection_metrics(&mut next, providers, label)?;
        }
    }
    Ok(next)
}

fn list_mut(manifest: &mut RunManifest) -> Result<&mut ShoppingList, PipelineError> {
    manifest
        .shopping_list
        .as_mut()
        .ok_or_else(|| PipelineError::InvalidEdit("run has no shopping list".into()))
}

fn record_mut<'a>(manifest: &'a mut RunManifest, path: &ItemPath) -> Result<&'a mut ItemRecord, PipelineError> {
    manifest
        .item_mut(path)
        .ok_or_else(|| PipelineError::UnknownItemPath(path.clone()))
}

fn invalid(e: impl ToString) -> PipelineError {
    PipelineError::InvalidEdit(e.to_string())
}

fn update_item(manifest: &mut RunManifest, path: &ItemPath, update: &ItemUpdate) -> Result<(), PipelineError> {
    let list = list_mut(manifest)?;
    let item = list.get_mut(path).ok_or_else(|| PipelineError::UnknownItemPath(path.clone()))?;
    let before = item.without_children();
    if let Some(c) = &update.category {
        item.category = c.trim().to_string();
    }
    if let Some(n) = update.count {
        item.count = n;
    }
    if let Some(a) = &update.attributes {
        item.attributes = a.iter().map(|s| s.trim().to_string()).collect();
    }
    if let Some(c) = &update.condition {
        item.condition = c.iter().map(|s| s.trim().to_string()).collect();
    }
    let after = item.without_children();
    list.validate(None).map_err(invalid)?;
    let query = build_query_string(&after, &list.scene);
    let record = record_mut(manifest, path)?;
    record.category = after.category.clone();
    record.count = after.count;
    if after != before {
        record.ranking_stale |= record.query != query;
        record.texture_stale |= record.selection.is_some();
    }
    record.query = query;
    Ok(())
}

/// Where `path` ends up after `deleted` is removed, or `None` if it was
/// inside the removed subtree.
fn shift_after_delete(path: &ItemPath, deleted: &ItemPath) -> Option<ItemPath> {
    if path.starts_with(deleted) {
        return None;
    }
    let d = deleted.indices();
    let mut p = path.indices().to_vec();
    let last = d.len() - 1;
    if p.len() > last && p[..last] == d[..last] && p[last] > d[last] {
        p[last] -= 1;
    }
    Some(ItemPath::new(p))
}

fn delete_item(manifest: &mut RunManifest, path: &ItemPath) -> Result<(), PipelineError> {
    let list = list_mut(manifest)?;
    if list.get(path).is_none() {
        return Err(PipelineError::UnknownItemPath(path.clone()));
    }
    if path.depth() == 0 && list.anchors.len() == 1 {
        return Err(PipelineError::InvalidEdit("cannot delete the only anchor".into()));
    }
    list.remove(path);
    let items = std::mem::take(&mut list.provenance.items);
    list.provenance.items = items
        .into_iter()
        .filter_map(|(key, refs)| {
            let p: ItemPath = key.parse().ok()?;
            shift_after_delete(&p, path).map(|p| (p.to_string(), refs))
        })
        .collect::<BTreeMap<_, _>>();
    let records = std::mem::take(&mut manifest.items);
    manifest.items = records
        .into_iter()
        .filter_map(|mut r| {
            r.path = shift_after_delete(&r.path, path)?;
            Some(r)
        })
        .collect();
    Ok(())
}

fn add_item(manifest: &mut RunManifest, parent: Option<&ItemPath>, item: &ShoppingItem) -> Result<(), PipelineError> {
    let list = list_mut(manifest)?;
    let path = match parent {
        None => {
            if list.anchors.len() >= MAX_ANCHORS {
                return Err(PipelineError::InvalidEdit(format!("already {MAX_ANCHORS} anchors")));
            }
            list.anchors.push(item.clone());
            ItemPath::root(list.anchors.len() - 1)
        }
        Some(p) => {
            let node = list.get_mut(p).ok_or_else(|| PipelineError::UnknownItemPath(p.clone()))?;
            node.children.push(item.clone());
            p.child(node.children.len() - 1)
        }
    };
    list.validate(None).map_err(invalid)?;
    let scene = list.scene.clone();
    let added: Vec<ItemRecord> = list
        .flatten_with_paths()
        .into_iter()
        .filter(|(p, _)| p.starts_with(&path))
        .map(|(p, node)| ItemRecord {
            path: p,
            category: node.category.clone(),
            count: node.count,
            query: build_query_string(node, &scene),
            retrieval: None,
            candidates: Vec::new(),
            selection: None,
            texture: None,
            unfulfilled: None,
            ranking_stale: true,
            texture_stale: false,
        })
        .collect();
    manifest.items.extend(added);
    manifest.items.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(())
}

fn select(manifest: &mut RunManifest, path: &ItemPath, rank: usize) -> Result<(), PipelineError> {
    let record = record_mut(manifest, path)?;
    let candidate = rank
        .checked_sub(1)
        .and_then(|i| record.candidates.get(i))
        .ok_or_else(|| PipelineError::UnknownCandidate { path: path.clone(), rank })?;
    record.selection = Some(Selection {
        rank,
        asset_id: candidate.asset_id.clone(),
    });
    record.texture_stale = true;
    Ok(())
}

fn retrieve(manifest: &mut RunManifest, path: &ItemPath, providers: &Providers) -> Result<(), PipelineError> {
    let auto_select = manifest.config.settings.auto_select;
    let record = manifest.item(path).ok_or_else(|| PipelineError::UnknownItemPath(path.clone()))?;
    let candidates = retrieve_record(record, manifest, providers)?;
    let record = record_mut(manifest, path)?;
    let previous = record.selection.take();
    // Keep the chosen asset if it survived; otherwise fall back to rank 1.
    let kept = previous.as_ref().and_then(|sel| {
        candidates.iter().position(|c| c.asset_id == sel.asset_id).map(|i| Selection {
            rank: i + 1,
            asset_id: sel.asset_id.clone(),
        })
    });
    record.selection = kept.or_else(|| {
        (auto_select || previous.is_some())
            .then(|| candidates.first())
            .flatten()
            .map(|c| Selection {
                rank: 1,
                asset_id: c.asset_id.clone(),
            })
    });
    let textured = record.texture.as_ref().map(|t| t.asset_id.as_str());
    if record.selection.as_ref().map(|s| s.asset_id.as_str()) != textured {
        record.texture_stale = true;
    }
    record.unfulfilled = candidates.is_empty().then(|| "no candidates".to_string());
    record.candidates = candidates;
    record.ranking_stale = false;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> ItemPath {
        s.parse().unwrap()
    }

    #[test]
    fn paths_shift_after_delete() {
        let del = p("1.2");
        assert_eq!(shift_after_delete(&p("1.2"), &del), None);
        assert_eq!(shift_after_delete(&p("1.2.0"), &del), None);
        assert_eq!(shift_after_delete(&p("1.3"), &del), Some(p("1.2")));
        assert_eq!(shift_after_delete(&p("1.3.4"), &del), Some(p("1.2.4")));
        assert_eq!(shift_after_delete(&p("1.1"), &del), Some(p("1.1")));
        assert_eq!(shift_after_delete(&p("2.3"), &del), Some(p("2.3")));
        assert_eq!(shift_after_delete(&p("1"), &del), Some(p("1")));
        assert_eq!(shift_after_delete(&p("3.0"), &p("1")), Some(p("2.0")));
    }

    #[test]
    fn patches_round_trip_as_tagged_json() {
        let patch = Patch::Select { path: p("0.1"), rank: 3 };
        let json = serde_json::to_string(&patch).unwrap();
        assert_eq!(json, r#"{"op":"select","path":"0.1","rank":3}"#);
        assert_eq!(serde_json::from_str::<Patch>(&json).unwrap(), patch);
        let metrics: Patch = serde_json::from_str(r#"{"op":"recompute_metrics"}"#).unwrap();
        assert_eq!(metrics, Patch::RecomputeMetrics);
    }
}
