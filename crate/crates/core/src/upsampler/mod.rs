//! Expands a scene description into a hierarchical shopping list by
//! prompting a completion model.
//!
//! One anchors call lists the main objects. Each item at depth `d - 1` then
//! gets one peripherals call for the objects around it, down to
//! `max_depth`. Finally every level gets one attributes call and one
//! condition call covering all of its categories. Blocks that fail to parse
//! are retried at a higher temperature before falling back to whatever
//! lines did parse.

mod completion;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::map_bounded;
use crate::provider::{sha256_hex, ProviderError};
use crate::shoplist::{
    merge_annotations, parse_block, parse_block_lenient, BlockEntry, BlockKind, ItemPath, PromptRecord, Provenance,
    SceneDescription, ShoplistError, ShoppingItem, ShoppingList, MAX_ANCHORS,
};

pub use completion::{
    prompt_key, write_exchange, CompletionProvider, HttpCompletionProvider, RecordingProvider, ReplayProvider, SamplingParams,
};
pub use template::{format_categories, render_prompt, PromptTemplate, TemplateKind, TemplateSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpsampleError {
    #[error("{} template needs a value for {placeholder}", kind.as_str())]
    MissingPlaceholderInput { kind: TemplateKind, placeholder: String },
    #[error("{} template body lacks the {placeholder} placeholder", kind.as_str())]
    TemplateMissingPlaceholder { kind: TemplateKind, placeholder: String },
    #[error("no parseable anchors after all retries")]
    EmptyAnchors,
    #[error("invalid upsampling config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Shoplist(#[from] ShoplistError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpsampleConfig {
    pub max_depth: usize,
    pub anchor_cap: usize,
    pub peripheral_cap: usize,
    pub max_retries: u32,
    /// Temperature added per retry.
    pub retry_temperature_step: f64,
    pub sampling: SamplingParams,
    /// Provider calls allowed in flight at once.
    pub concurrency: usize,
}

impl Default for UpsampleConfig {
    fn default() -> Self {
        Self {
            max_depth: 1,
            anchor_cap: MAX_ANCHORS,
            peripheral_cap: 8,
            max_retries: 2,
            retry_temperature_step: 0.2,
            sampling: SamplingParams::default(),
            concurrency: 4,
        }
    }
}

impl UpsampleConfig {
    pub fn validate(&self) -> Result<(), UpsampleError> {
        let bad = |m: String| Err(UpsampleError::InvalidConfig(m));
        if !(1..=MAX_ANCHORS).contains(&self.anchor_cap) {
            return bad(format!("anchor_cap must be in 1..={MAX_ANCHORS}, got {}", self.anchor_cap));
        }
        if self.peripheral_cap == 0 {
            return bad("peripheral_cap must be at least 1".into());
        }
        if !self.retry_temperature_step.is_finite() || self.retry_temperature_step < 0.0 {
            return bad(format!("retry_temperature_step must be >= 0, got {}", self.retry_temperature_step));
        }
        self.sampling.validate().map_err(UpsampleError::InvalidConfig)
    }
}

/// Outcome of one template call after retries.
struct BlockResult {
    entries: Vec<BlockEntry>,
    records: Vec<PromptRecord>,
    /// Id of the attempt whose output was used.
    used_id: String,
    warnings: Vec<String>,
}

struct Caller<'a> {
    provider: &'a dyn CompletionProvider,
    config: &'a UpsampleConfig,
}

impl Caller<'_> {
    /// Calls the provider until `prompt` yields a cleanly parsed, non-empty
    /// block or retries run out; then keeps the best lenient parse.
    fn call(&self, id: &str, kind: TemplateKind, block: BlockKind, prompt: &str) -> Result<BlockResult, ProviderError> {
        let mut records = Vec::new();
        let mut best: Option<(usize, Vec<BlockEntry>, usize)> = None;
        let sha = sha256_hex(prompt.as_bytes());
        for attempt in 0..=self.config.max_retries {
            let temperature = self.config.sampling.temperature + self.config.retry_temperature_step * attempt as f64;
            let params = self.config.sampling.with_temperature(temperature);
            let completion = self.provider.complete(prompt, &params)?;
            let attempt_id = format!("{id}#{attempt}");
            records.push(PromptRecord {
                id: attempt_id.clone(),
                kind: kind.as_str().to_string(),
                prompt_sha256: sha.clone(),
                prompt: prompt.to_string(),
                completion: completion.clone(),
                temperature,
                attempt,
            });
            if let Ok(entries) = parse_block(block, &completion) {
                if !entries.is_empty() {
                    return Ok(BlockResult {
                        entries,
                        records,
                        used_id: attempt_id,
                        warnings: Vec::new(),
                    });
                }
            }
            let lenient = parse_block_lenient(block, &completion);
            if best.as_ref().is_none_or(|(_, e, _)| lenient.entries.len() > e.len()) {
                best = Some((attempt as usize, lenient.entries, lenient.errors.len()));
            }
        }
        let (attempt, entries, bad_lines) = best.expect("at least one attempt");
        let warning = format!(
            "{id}: no clean parse after {} attempt(s); kept {} entries from attempt {attempt} ({bad_lines} bad lines)",
            records.len(),
            entries.len()
        );
        Ok(BlockResult {
            entries,
            used_id: format!("{id}#{attempt}"),
            records,
            warnings: vec![warning],
        })
    }
}

fn counts_of(entries: Vec<BlockEntry>) -> Vec<(String, u32)> {
    entries.into_iter().map(BlockEntry::into_count).collect()
}

fn phrases_of(entries: Vec<BlockEntry>) -> Vec<(String, Vec<String>)> {
    entries.into_iter().map(BlockEntry::into_phrases).collect()
}

/// Expands `scene` with the built-in templates.
pub fn upsample(
    scene: &SceneDescription,
    provider: &dyn CompletionProvider,
    config: &UpsampleConfig,
) -> Result<ShoppingList, UpsampleError> {
    upsample_with_templates(scene, provider, &TemplateSet::default(), config)
}

pub fn upsample_with_templates(
    scene: &SceneDescription,
    provider: &dyn CompletionProvider,
    templates: &TemplateSet,
    config: &UpsampleConfig,
) -> Result<ShoppingList, UpsampleError> {
    config.validate()?;
    let caller = Caller { provider, config };
    let mut prov = Provenance::default();
    let no_cats: Option<&[&str]> = None;

    // Anchors.
    let prompt = render_prompt(&templates.anchors, scene, None, no_cats)?;
    let result = caller.call("anchors", TemplateKind::Anchors, BlockKind::Counts, &prompt)?;
    prov.prompts.extend(result.records);
    prov.warnings.extend(result.warnings);
    let mut counts = counts_of(result.entries);
    if counts.is_empty() {
        return Err(UpsampleError::EmptyAnchors);
    }
    if counts.len() > config.anchor_cap {
        prov.warnings.push(format!(
            "anchors: {} returned, kept the first {}",
            counts.len(),
            config.anchor_cap
        ));
        counts.truncate(config.anchor_cap);
    }
    let mut anchors: Vec<ShoppingItem> = Vec::new();
    // levels[d] holds (path, count) for every item at depth d, in pre-order.
    let mut levels: Vec<Vec<(ItemPath, u32)>> = vec![Vec::new()];
    for (i, (category, count)) in counts.into_iter().enumerate() {
        let path = ItemPath::root(i);
        prov.items.insert(path.to_string(), vec![result.used_id.clone()]);
        levels[0].push((path, count));
        anchors.push(ShoppingItem::new(category).with_count(count));
    }
    let mut list = ShoppingList {
        scene: scene.clone(),
        anchors,
        provenance: Provenance::default(),
    };

    // Peripherals, one call per parent, level by level.
    for depth in 1..=config.max_depth {
        let parents: Vec<(ItemPath, String)> = levels[depth - 1]
            .iter()
            .map(|(p, _)| (p.clone(), list.get(p).expect("level path exists").category.clone()))
            .collect();
        let results = map_bounded(&parents, config.concurrency, |_, (path, category)| {
            let prompt = render_prompt(&templates.peripherals, scene, Some(category), no_cats)?;
            Ok::<_, UpsampleError>(caller.call(&format!("peripherals@{path}"), TemplateKind::Peripherals, BlockKind::Counts, &prompt)?)
        });
        let mut next = Vec::new();
        for ((path, category), result) in parents.iter().zip(results) {
            let result = result?;
            prov.prompts.extend(result.records);
            prov.warnings.extend(result.warnings);
            let mut children = counts_of(result.entries);
            if children.is_empty() {
                prov.warnings.push(format!("peripherals@{path}: no objects around {category:?}"));
            }
            if children.len() > config.peripheral_cap {
                prov.warnings.push(format!(
                    "peripherals@{path}: {} returned around {category:?}, kept the first {}",
                    children.len(),
                    config.peripheral_cap
                ));
                children.truncate(config.peripheral_cap);
            }
            let parent = list.get_mut(path).expect("parent path exists");
            for (j, (child, count)) in children.into_iter().enumerate() {
                let child_path = path.child(j);
                prov.items.insert(child_path.to_string(), vec![result.used_id.clone()]);
                next.push((child_path, count));
                parent.children.push(ShoppingItem::new(child).with_count(count));
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }

    // Attributes and condition, one call each per level.
    let mut tasks = Vec::new();
    for (depth, level) in levels.iter().enumerate() {
        let cats: Vec<String> = level.iter().map(|(p, _)| list.get(p).expect("level path").category.clone()).collect();
        for (kind, block, template) in [
            (TemplateKind::Attributes, BlockKind::Attributes, &templates.attributes),
            (TemplateKind::Condition, BlockKind::Condition, &templates.condition),
        ] {
            let prompt = render_prompt(template, scene, None, Some(&cats[..]))?;
            tasks.push((depth, kind, block, format!("{}@L{depth}", kind.as_str()), prompt));
        }
    }
    let results = map_bounded(&tasks, config.concurrency, |_, (_, kind, block, id, prompt)| caller.call(id, *kind, *block, prompt));
    let mut annotation = vec![(None, None); levels.len()];
    for ((depth, kind, ..), result) in tasks.iter().zip(results) {
        let result = result?;
        prov.prompts.extend(result.records);
        prov.warnings.extend(result.warnings);
        let parsed = (phrases_of(result.entries), result.used_id);
        match kind {
            TemplateKind::Attributes => annotation[*depth].0 = Some(parsed),
            _ => annotation[*depth].1 = Some(parsed),
        }
    }
    for (depth, (level, (attrs, conds))) in levels.iter().zip(annotation).enumerate() {
        let (attrs, attr_id) = attrs.expect("attributes call ran");
        let (conds, cond_id) = conds.expect("condition call ran");
        let counts: Vec<(String, u32)> = level
            .iter()
            .map(|(p, c)| (list.get(p).expect("level path").category.clone(), *c))
            .collect();
        let merged = merge_annotations(&counts, &attrs, &conds);
        prov.warnings.extend(merged.warnings.into_iter().map(|w| format!("level {depth}: {w}")));
        for ((path, _), item) in level.iter().zip(merged.items.iter()) {
            let node = list.get_mut(path).expect("level path");
            node.attributes = item.attributes.clone();
            node.condition = item.condition.clone();
            let ids = prov.items.entry(path.to_string()).or_default();
            ids.push(attr_id.clone());
            ids.push(cond_id.clone());
        }
        if merged.items.len() > level.len() {
            prov.warnings.push(format!(
                "level {depth}: dropped {} annotated categories that no counts pass produced",
                merged.items.len() - level.len()
            ));
        }
    }

    list.provenance = prov;
    list.validate(Some(config.max_depth))?;
    Ok(list)
}

/// Prompt/completion pairs that a model reproducing `list` exactly would
/// produce under `max_depth`, for building replay fixtures from a known
/// list. Items with no children at depth below `max_depth` get an empty
/// peripherals completion.
pub fn script_for_list(
    list: &ShoppingList,
    templates: &TemplateSet,
    max_depth: usize,
) -> Result<Vec<(String, String)>, UpsampleError> {
    let no_cats: Option<&[&str]> = None;
    let count_line = |it: &ShoppingItem| format!("* {} : {}", it.category, it.count);
    let phrase_line = |it: &ShoppingItem, phrases: &[String]| {
        if phrases.is_empty() {
            format!("* {} :", it.category)
        } else {
            format!("* {} : {}.", it.category, phrases.join(", "))
        }
    };
    let mut script = Vec::new();

    let prompt = render_prompt(&templates.anchors, &list.scene, None, no_cats)?;
    script.push((prompt, list.anchors.iter().map(count_line).collect::<Vec<_>>().join("\n")));

    let mut level: Vec<&ShoppingItem> = list.anchors.iter().collect();
    let mut depth = 0;
    while !level.is_empty() {
        let cats: Vec<&str> = level.iter().map(|it| it.category.as_str()).collect();
        let prompt = render_prompt(&templates.attributes, &list.scene, None, Some(&cats[..]))?;
        let block = level.iter().map(|it| phrase_line(it, &it.attributes)).collect::<Vec<_>>().join("\n");
        script.push((prompt, block));
        let prompt = render_prompt(&templates.condition, &list.scene, None, Some(&cats[..]))?;
        let block = level.iter().map(|it| phrase_line(it, &it.condition)).collect::<Vec<_>>().join("\n");
        script.push((prompt, block));

        if depth == max_depth {
            break;
        }
        let mut next = Vec::new();
        for it in &level {
            let prompt = render_prompt(&templates.peripherals, &list.scene, Some(&it.category), no_cats)?;
            script.push((prompt, it.children.iter().map(count_line).collect::<Vec<_>>().join("\n")));
            next.extend(it.children.iter());
        }
        level = next;
        depth += 1;
    }
    Ok(script)
}
