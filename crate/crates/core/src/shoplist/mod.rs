//! The semantic shopping list: the editable, human-readable intermediate
//! representation every pipeline stage reads and writes.
//!
//! A list is a shallow tree. Anchor objects sit at the top level and
//! peripheral objects hang beneath the anchor they were generated around.
//! Each node carries a category, a count, appearance attributes and a
//! physical condition.

mod block;
mod human;
mod merge;
mod query;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use block::{parse_block, parse_block_lenient, parse_counts, parse_phrases, BlockEntry, BlockKind, BlockPayload, LenientBlock};
pub use human::{parse_human, parse_list_document, read_list_file, serialize_human, write_list_file, ListFileError, SCENE_HEADER};
pub use merge::{merge_annotations, MergeOutcome};
pub use query::{build_query_string, QueryString};

/// Hard cap on anchors per list (and peripherals per anchor in the upsampler).
pub const MAX_ANCHORS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShoplistError {
    #[error("scene description is empty")]
    EmptyScene,
    #[error("line {line_number}: malformed line {content:?}")]
    MalformedLine { line_number: usize, content: String },
    #[error("line {line_number}: count is not a positive integer in {content:?}")]
    NonIntegerCount { line_number: usize, content: String },
    #[error("line {line_number}: indentation jumps more than one level")]
    IndentJump { line_number: usize },
    #[error("shopping list has no anchors")]
    EmptyList,
    #[error("shopping list has {count} anchors, at most {MAX_ANCHORS} allowed")]
    TooManyAnchors { count: usize },
    #[error("item at {path} has an empty category")]
    EmptyCategory { path: ItemPath },
    #[error("item at {path} has count 0")]
    ZeroCount { path: ItemPath },
    #[error("item at {path}: {reason}")]
    InvalidText { path: ItemPath, reason: String },
    #[error("item at {path} exceeds max depth {max_depth}")]
    DepthExceeded { path: ItemPath, max_depth: usize },
    #[error("invalid item path {0:?}")]
    BadPath(String),
}

/// An abstract scene description such as "a busy city street".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SceneDescription(String);

impl SceneDescription {
    pub fn new(text: impl AsRef<str>) -> Result<Self, ShoplistError> {
        let trimmed = text.as_ref().trim();
        if trimmed.is_empty() {
            return Err(ShoplistError::EmptyScene);
        }
        Ok(Self(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SceneDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for SceneDescription {
    type Error = ShoplistError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<SceneDescription> for String {
    fn from(value: SceneDescription) -> Self {
        value.0
    }
}

/// Position of a node in the tree: child indices from the anchor list down.
///
/// Rendered as dot-separated indices (`"2"` is the third anchor, `"2.0"` its
/// first child).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ItemPath(Vec<usize>);

impl ItemPath {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn root(index: usize) -> Self {
        Self(vec![index])
    }

    pub fn child(&self, index: usize) -> Self {
        let mut indices = self.0.clone();
        indices.push(index);
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Depth of the node (anchors are depth 0).
    pub fn depth(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn parent(&self) -> Option<ItemPath> {
        if self.0.len() <= 1 {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn starts_with(&self, prefix: &ItemPath) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for ItemPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{idx}")?;
        }
        Ok(())
    }
}

impl FromStr for ItemPath {
    type Err = ShoplistError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ShoplistError::BadPath(s.to_string()));
        }
        s.split('.')
            .map(|part| part.parse::<usize>().map_err(|_| ShoplistError::BadPath(s.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl Serialize for ItemPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ItemPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One line of the shopping list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShoppingItem {
    pub category: String,
    #[serde(default = "one")]
    pub count: u32,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub condition: Vec<String>,
    #[serde(default)]
    pub children: Vec<ShoppingItem>,
}

fn one() -> u32 {
    1
}

impl ShoppingItem {
    pub fn new(category: impl Into<String>) -> Self {
        Self {
            category: category.into(),
            count: 1,
            attributes: Vec::new(),
            condition: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn with_count(mut self, count: u32) -> Self {
        self.count = count;
        self
    }

    pub fn with_attributes<I, S>(mut self, attributes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attributes = attributes.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_condition<I, S>(mut self, condition: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.condition = condition.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_children(mut self, children: Vec<ShoppingItem>) -> Self {
        self.children = children;
        self
    }

    /// Number of nodes in this subtree, including `self`.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ShoppingItem::node_count).sum::<usize>()
    }

    /// Height of the subtree (a leaf has height 0).
    pub fn height(&self) -> usize {
        self.children.iter().map(|c| c.height() + 1).max().unwrap_or(0)
    }

    /// Same node content, ignoring children.
    pub fn without_children(&self) -> ShoppingItem {
        ShoppingItem {
            children: Vec::new(),
            ..self.clone()
        }
    }

    fn validate_at(&self, path: &ItemPath, max_depth: Option<usize>) -> Result<(), ShoplistError> {
        if self.category.trim().is_empty() {
            return Err(ShoplistError::EmptyCategory { path: path.clone() });
        }
        if self.category.trim() != self.category || self.category.contains(['\n', '\r']) {
            return Err(ShoplistError::InvalidText {
                path: path.clone(),
                reason: format!("category {:?} has surrounding whitespace or a line break", self.category),
            });
        }
        if self.count == 0 {
            return Err(ShoplistError::ZeroCount { path: path.clone() });
        }
        for phrase in self.attributes.iter().chain(&self.condition) {
            if phrase.is_empty() || phrase.trim() != phrase || phrase.contains(['\n', '\r']) {
                return Err(ShoplistError::InvalidText {
                    path: path.clone(),
                    reason: format!("phrase {phrase:?} is empty, padded, or spans lines"),
                });
            }
        }
        if let Some(max) = max_depth {
            if path.depth() > max {
                return Err(ShoplistError::DepthExceeded { path: path.clone(), max_depth: max });
            }
        }
        for (i, child) in self.children.iter().enumerate() {
            child.validate_at(&path.child(i), max_depth)?;
        }
        Ok(())
    }
}

/// One prompt/completion exchange recorded while building a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub kind: String,
    pub prompt_sha256: String,
    pub prompt: String,
    pub completion: String,
    pub temperature: f64,
    pub attempt: u32,
}

/// Generation metadata for a list; ignored by structural comparison.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub prompts: Vec<PromptRecord>,
    /// Item path → ids of the prompts that produced its category and annotations.
    #[serde(default)]
    pub items: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Provenance {
    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty() && self.items.is_empty() && self.warnings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShoppingList {
    pub scene: SceneDescription,
    pub anchors: Vec<ShoppingItem>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ShoppingList {
    /// Builds a list and checks the tree invariants (no depth limit).
    pub fn new(scene: SceneDescription, anchors: Vec<ShoppingItem>) -> Result<Self, ShoplistError> {
        let list = Self {
            scene,
            anchors,
            provenance: Provenance::default(),
        };
        list.validate(None)?;
        Ok(list)
    }

    pub fn validate(&self, max_depth: Option<usize>) -> Result<(), ShoplistError> {
        if self.anchors.is_empty() {
            return Err(ShoplistError::EmptyList);
        }
        if self.anchors.len() > MAX_ANCHORS {
            return Err(ShoplistError::TooManyAnchors { count: self.anchors.len() });
        }
        for (i, anchor) in self.anchors.iter().enumerate() {
            anchor.validate_at(&ItemPath::root(i), max_depth)?;
        }
        Ok(())
    }

    /// Scene and tree equality, ignoring provenance.
    pub fn structurally_eq(&self, other: &ShoppingList) -> bool {
        self.scene == other.scene && self.anchors == other.anchors
    }

    pub fn node_count(&self) -> usize {
        self.anchors.iter().map(ShoppingItem::node_count).sum()
    }

    /// Depth of the deepest node (anchors only → 0).
    pub fn depth(&self) -> usize {
        self.anchors.iter().map(ShoppingItem::height).max().unwrap_or(0)
    }

    /// Pre-order traversal: each anchor, then its subtree, then the next anchor.
    pub fn flatten(&self) -> Vec<&ShoppingItem> {
        self.flatten_with_paths().into_iter().map(|(_, item)| item).collect()
    }

    pub fn flatten_with_paths(&self) -> Vec<(ItemPath, &ShoppingItem)> {
        fn walk<'a>(item: &'a ShoppingItem, path: ItemPath, out: &mut Vec<(ItemPath, &'a ShoppingItem)>) {
            for (i, child) in item.children.iter().enumerate() {
                let child_path = path.child(i);
                out.push((child_path.clone(), child));
                walk(child, child_path, out);
            }
        }
        let mut out = Vec::with_capacity(self.node_count());
        for (i, anchor) in self.anchors.iter().enumerate() {
            let path = ItemPath::root(i);
            out.push((path.clone(), anchor));
            walk(anchor, path, &mut out);
        }
        out
    }

    pub fn get(&self, path: &ItemPath) -> Option<&ShoppingItem> {
        let (first, rest) = path.indices().split_first()?;
        let mut node = self.anchors.get(*first)?;
        for idx in rest {
            node = node.children.get(*idx)?;
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &ItemPath) -> Option<&mut ShoppingItem> {
        let (first, rest) = path.indices().split_first()?;
        let mut node = self.anchors.get_mut(*first)?;
        for idx in rest {
            node = node.children.get_mut(*idx)?;
        }
        Some(node)
    }

    /// Detaches the subtree at `path` and returns it.
    pub fn remove(&mut self, path: &ItemPath) -> Option<ShoppingItem> {
        match path.parent() {
            None => {
                let idx = *path.indices().first()?;
                (idx < self.anchors.len()).then(|| self.anchors.remove(idx))
            }
            Some(parent) => {
                let idx = *path.indices().last()?;
                let node = self.get_mut(&parent)?;
                (idx < node.children.len()).then(|| node.children.remove(idx))
            }
        }
    }
}

/// Free-function form of [`ShoppingList::flatten`].
pub fn flatten(list: &ShoppingList) -> Vec<&ShoppingItem> {
    list.flatten()
}
