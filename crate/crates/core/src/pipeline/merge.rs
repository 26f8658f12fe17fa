//! Combining two shopping lists for the same scene.
//!
//! Items match when their categories are equal ignoring ASCII case, compared
//! among siblings only. Union keeps every item from either list, merging
//! matched items (annotations deduplicated, larger count, children merged
//! recursively). Intersection keeps the items of the first list that have a
//! match in the second, with annotations from the first list and children
//! intersected recursively.

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::shoplist::{Provenance, ShoppingItem, ShoppingList, MAX_ANCHORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    Union,
    Intersection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedList {
    pub list: ShoppingList,
    pub warnings: Vec<String>,
}

fn same_category(a: &ShoppingItem, b: &ShoppingItem) -> bool {
    a.category.eq_ignore_ascii_case(&b.category)
}

fn union_phrases(a: &[String], b: &[String]) -> Vec<String> {
    let mut out = a.to_vec();
    for phrase in b {
        if !out.iter().any(|p| p.eq_ignore_ascii_case(phrase)) {
            out.push(phrase.clone());
        }
    }
    out
}

fn union_items(a: &[ShoppingItem], b: &[ShoppingItem]) -> Vec<ShoppingItem> {
    let mut out: Vec<ShoppingItem> = Vec::with_capacity(a.len() + b.len());
    for item in a.iter().chain(b) {
        match out.iter_mut().find(|o| same_category(o, item)) {
            Some(existing) => {
                existing.count = existing.count.max(item.count);
                existing.attributes = union_phrases(&existing.attributes, &item.attributes);
                existing.condition = union_phrases(&existing.condition, &item.condition);
                existing.children = union_items(&existing.children, &item.children);
            }
            None => out.push(item.clone()),
        }
    }
    out
}

fn intersect_items(a: &[ShoppingItem], b: &[ShoppingItem]) -> Vec<ShoppingItem> {
    a.iter()
        .filter_map(|item| {
            let other = b.iter().find(|o| same_category(o, item))?;
            Some(ShoppingItem {
                children: intersect_items(&item.children, &other.children),
                ..item.clone()
            })
        })
        .collect()
}

/// Merges `b` into `a`. Both lists must describe the same scene.
pub fn merge_lists(a: &ShoppingList, b: &ShoppingList, mode: MergeMode) -> Result<MergedList, PipelineError> {
    if a.scene != b.scene {
        return Err(PipelineError::Merge(format!("scenes differ: {:?} vs {:?}", a.scene.as_str(), b.scene.as_str())));
    }
    let mut warnings = Vec::new();
    let mut anchors = match mode {
        MergeMode::Union => union_items(&a.anchors, &b.anchors),
        MergeMode::Intersection => intersect_items(&a.anchors, &b.anchors),
    };
    if anchors.is_empty() {
        return Err(PipelineError::Merge("the lists share no anchor categories".into()));
    }
    if anchors.len() > MAX_ANCHORS {
        warnings.push(format!("union has {} anchors; kept the first {MAX_ANCHORS}", anchors.len()));
        anchors.truncate(MAX_ANCHORS);
    }
    let list = ShoppingList {
        scene: a.scene.clone(),
        anchors,
        provenance: Provenance {
            warnings: warnings.clone(),
            ..Provenance::default()
        },
    };
    Ok(MergedList { list, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shoplist::SceneDescription;

    fn list(anchors: Vec<ShoppingItem>) -> ShoppingList {
        ShoppingList::new(SceneDescription::new("a den").unwrap(), anchors).unwrap()
    }

    #[test]
    fn union_merges_matching_categories() {
        let a = list(vec![
            ShoppingItem::new("sofa").with_attributes(["green"]).with_children(vec![ShoppingItem::new("pillow")]),
            ShoppingItem::new("lamp"),
        ]);
        let b = list(vec![
            ShoppingItem::new("Sofa").with_count(2).with_attributes(["Green", "velvet"]).with_children(vec![ShoppingItem::new("blanket")]),
            ShoppingItem::new("rug"),
        ]);
        let merged = merge_lists(&a, &b, MergeMode::Union).unwrap().list;
        let cats: Vec<&str> = merged.flatten().iter().map(|i| i.category.as_str()).collect();
        assert_eq!(cats, ["sofa", "pillow", "blanket", "lamp", "rug"]);
        assert_eq!(merged.anchors[0].count, 2);
        assert_eq!(merged.anchors[0].attributes, ["green", "velvet"]);
    }

    #[test]
    fn intersection_keeps_shared_items() {
        let a = list(vec![
            ShoppingItem::new("sofa").with_children(vec![ShoppingItem::new("pillow"), ShoppingItem::new("throw")]),
            ShoppingItem::new("lamp"),
        ]);
        let b = list(vec![ShoppingItem::new("sofa").with_children(vec![ShoppingItem::new("throw")])]);
        let merged = merge_lists(&a, &b, MergeMode::Intersection).unwrap().list;
        let cats: Vec<&str> = merged.flatten().iter().map(|i| i.category.as_str()).collect();
        assert_eq!(cats, ["sofa", "throw"]);
        let disjoint = list(vec![ShoppingItem::new("piano")]);
        assert!(matches!(merge_lists(&a, &disjoint, MergeMode::Intersection), Err(PipelineError::Merge(_))));
    }

    #[test]
    fn union_caps_anchors() {
        let a = list((0..6).map(|i| ShoppingItem::new(format!("a{i}"))).collect());
        let b = list((0..6).map(|i| ShoppingItem::new(format!("b{i}"))).collect());
        let merged = merge_lists(&a, &b, MergeMode::Union).unwrap();
        assert_eq!(merged.list.anchors.len(), MAX_ANCHORS);
        assert_eq!(merged.warnings.len(), 1);
    }
}
