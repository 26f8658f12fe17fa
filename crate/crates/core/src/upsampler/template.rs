//! In-context prompt templates.
//!
//! Each template is one worked example followed by a query segment of the
//! same shape. The rendered prompt ends right where the model should start
//! writing `* Category : ...` lines.

use serde::{Deserialize, Serialize};

use super::UpsampleError;
use crate::shoplist::SceneDescription;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Anchors,
    Peripherals,
    Attributes,
    Condition,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] = [Self::Anchors, Self::Peripherals, Self::Attributes, Self::Condition];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Anchors => "anchors",
            Self::Peripherals => "peripherals",
            Self::Attributes => "attributes",
            Self::Condition => "condition",
        }
    }

    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            Self::Anchors => &[SCENE],
            Self::Peripherals => &[SCENE, ANCHOR],
            Self::Attributes | Self::Condition => &[SCENE, CATEGORIES],
        }
    }
}

pub const SCENE: &str = "{SCENE}";
pub const ANCHOR: &str = "{ANCHOR}";
pub const CATEGORIES: &str = "{CATEGORIES}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate")]
pub struct PromptTemplate {
    kind: TemplateKind,
    body: String,
}

#[derive(Deserialize)]
struct RawTemplate {
    kind: TemplateKind,
    body: String,
}

impl TryFrom<RawTemplate> for PromptTemplate {
    type Error = UpsampleError;

    fn try_from(raw: RawTemplate) -> Result<Self, Self::Error> {
        PromptTemplate::new(raw.kind, raw.body)
    }
}

const SCENE_PREAMBLE_EXAMPLE: &str =
    "Here we are building a 3D scene of a french restaurant. At each step, we are not adding more than 8 assets in total into the scene.";
const SCENE_PREAMBLE_QUERY: &str =
    "Here we are building a 3D scene of {SCENE}. At each step, we are not adding more than 8 assets in total into the scene.";

const EXAMPLE_CATEGORIES: &str = "* Table\n* Chairs\n* Bar\n* Bar stools";

fn anchors_body() -> String {
    let ask = "First, we place the most important assets (e.g. furnitures, bigger objects) and use those as our anchors. Here is a list of them:";
    format!(
        "{SCENE_PREAMBLE_EXAMPLE}\n\n{ask}\n\n* Tables : 1\n* Chairs : 4\n* Bar : 1\n* Bar stools : 2\n\n\
         {SCENE_PREAMBLE_QUERY}\n\n{ask}\n\n"
    )
}

fn peripherals_body() -> String {
    let lead = "Next we enhance the scene with more assets, in relation to the anchor objects.";
    format!(
        "{SCENE_PREAMBLE_EXAMPLE}\n\n{lead}\nIn relation to the `table`, here is the list of assets we add:\n\n\
         * Tablecloth : 1\n* Plates : 4\n* Silverware : 4\n* Wine glasses : 2\n\n\
         {SCENE_PREAMBLE_QUERY}\n\n{lead}\nIn relation to the `{ANCHOR}`, here is the list of assets we add:\n\n"
    )
}

fn attributes_body() -> String {
    let ask = |scene: &str| {
        format!(
            "Suppose we want to create a shopping list for the items we need to create the above scene of {scene}. \
             It would look like, being specific about the brand and the visual properties:"
        )
    };
    format!(
        "Here we are building a 3D scene of a fancy french restaurant. The items in the scene are:\n{EXAMPLE_CATEGORIES}\n\n{}\n\n\
         * Table : country style farmhouse table, oakwood and dark brown.\n\
         * Chairs : provincial style chairs, upholstered in ivory velvet.\n\
         * Bar : Traditional style bar counter, white marble, gold accents on the corners.\n\
         * Bar stools : provincial style bar stools, upholstered in ivory velvet, golden accents on corners\n\n\
         Here we are building a 3D scene of {SCENE}. The items in the scene are:\n{CATEGORIES}\n\n{}\n\n",
        ask("a fancy french restaurant"),
        ask(SCENE)
    )
}

fn condition_body() -> String {
    format!(
        "Here we are building a 3D scene of a fancy french restaurant. The items in the scene are:\n{EXAMPLE_CATEGORIES}\n\n\
         Describe the physical condition of these items in a scene of a fancy french restaurant:\n\n\
         * Table : smooth, polished finish.\n\
         * Chairs : slight signs of wear on the sides.\n\
         * Bar : slight signs of wear.\n\
         * Bar stools : slight wear on the rattan seats.\n\n\
         Here we are building a 3D scene of {SCENE}. The items in the scene are:\n{CATEGORIES}\n\n\
         Describe the physical condition of these items in a scene of {SCENE}:\n\n"
    )
}

impl PromptTemplate {
    /// A custom template; its body must contain every placeholder `kind` needs.
    pub fn new(kind: TemplateKind, body: impl Into<String>) -> Result<Self, UpsampleError> {
        let body = body.into();
        for p in kind.required_placeholders() {
            if !body.contains(p) {
                return Err(UpsampleError::TemplateMissingPlaceholder {
                    kind,
                    placeholder: p.to_string(),
                });
            }
        }
        Ok(Self { kind, body })
    }

    pub fn builtin(kind: TemplateKind) -> Self {
        let body = match kind {
            TemplateKind::Anchors => anchors_body(),
            TemplateKind::Peripherals => peripherals_body(),
            TemplateKind::Attributes => attributes_body(),
            TemplateKind::Condition => condition_body(),
        };
        Self { kind, body }
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

/// The four templates an upsampling run uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub anchors: PromptTemplate,
    pub peripherals: PromptTemplate,
    pub attributes: PromptTemplate,
    pub condition: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            anchors: PromptTemplate::builtin(TemplateKind::Anchors),
            peripherals: PromptTemplate::builtin(TemplateKind::Peripherals),
            attributes: PromptTemplate::builtin(TemplateKind::Attributes),
            condition: PromptTemplate::builtin(TemplateKind::Condition),
        }
    }
}

impl TemplateSet {
    pub fn get(&self, kind: TemplateKind) -> &PromptTemplate {
        match kind {
            TemplateKind::Anchors => &self.anchors,
            TemplateKind::Peripherals => &self.peripherals,
            TemplateKind::Attributes => &self.attributes,
            TemplateKind::Condition => &self.condition,
        }
    }
}

/// Bulleted category list as it appears in the attribute/condition query.
pub fn format_categories<S: AsRef<str>>(categories: &[S]) -> String {
    categories
        .iter()
        .map(|c| format!("* {}", c.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Substitutes placeholders in one left-to-right pass, so placeholder-like
/// text inside a substituted value is never expanded again.
pub fn render_prompt<S: AsRef<str>>(
    template: &PromptTemplate,
    scene: &SceneDescription,
    anchor: Option<&str>,
    categories: Option<&[S]>,
) -> Result<String, UpsampleError> {
    let missing = |placeholder: &str| UpsampleError::MissingPlaceholderInput {
        kind: template.kind,
        placeholder: placeholder.to_string(),
    };
    let needs = template.kind.required_placeholders();
    let anchor_text = match anchor {
        Some(a) => Some(a.to_string()),
        None if needs.contains(&ANCHOR) => return Err(missing(ANCHOR)),
        None => None,
    };
    let categories_text = match categories {
        Some(c) if !c.is_empty() => Some(format_categories(c)),
        _ if needs.contains(&CATEGORIES) => return Err(missing(CATEGORIES)),
        _ => None,
    };

    let mut out = String::with_capacity(template.body.len() + 256);
    let mut rest = template.body.as_str();
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        let (value, len) = if tail.starts_with(SCENE) {
            (Some(scene.as_str()), SCENE.len())
        } else if tail.starts_with(ANCHOR) {
            (Some(anchor_text.as_deref().ok_or_else(|| missing(ANCHOR))?), ANCHOR.len())
        } else if tail.starts_with(CATEGORIES) {
            (Some(categories_text.as_deref().ok_or_else(|| missing(CATEGORIES))?), CATEGORIES.len())
        } else {
            (None, 1)
        };
        match value {
            Some(v) => out.push_str(v),
            None => out.push('{'),
        }
        rest = &tail[len..];
    }
    out.push_str(rest);
    Ok(out)
}
