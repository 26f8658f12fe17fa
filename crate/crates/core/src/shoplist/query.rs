use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SceneDescription, ShoppingItem};

/// Retrieval/texturing query text. Always contains the scene description
/// verbatim, so every query carries the scene's style even when an item's
/// own annotations are thin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryString(String);

impl QueryString {
    /// Wraps `text`, or returns `None` if it does not contain the scene.
    pub fn for_scene(text: impl Into<String>, scene: &SceneDescription) -> Option<Self> {
        let text = text.into();
        text.contains(scene.as_str()).then_some(Self(text))
    }

    /// The baseline query: the bare scene description.
    pub fn bare(scene: &SceneDescription) -> Self {
        Self(scene.as_str().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QueryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `<category>, in a scene of <scene>, <attrs>. <conds>.`
///
/// Empty attributes drop the `, <attrs>` segment, empty condition drops the
/// trailing sentence; with neither there is no terminal period.
pub fn build_query_string(item: &ShoppingItem, scene: &SceneDescription) -> QueryString {
    let mut text = format!("{}, in a scene of {}", item.category, scene.as_str());
    if !item.attributes.is_empty() {
        text.push_str(", ");
        text.push_str(&item.attributes.join(", "));
        text.push('.');
    }
    if !item.condition.is_empty() {
        if item.attributes.is_empty() {
            text.push('.');
        }
        text.push(' ');
        text.push_str(&item.condition.join(", "));
        text.push('.');
    }
    QueryString(text)
}
