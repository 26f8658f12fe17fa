//! Parsing of raw completion blocks (`* Category : payload` lines).

use serde::{Deserialize, Serialize};

use super::ShoplistError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Counts,
    Attributes,
    Condition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockPayload {
    Count(u32),
    Phrases(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockEntry {
    pub category: String,
    pub payload: BlockPayload,
}

/// Result of a best-effort parse: every well-formed line plus the errors
/// for the rest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LenientBlock {
    pub entries: Vec<BlockEntry>,
    pub errors: Vec<ShoplistError>,
}

/// Splits a phrase list on both commas and periods.
pub(crate) fn split_phrases(text: &str) -> Vec<String> {
    text.split([',', '.'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_line(kind: BlockKind, line_number: usize, raw: &str) -> Result<Option<BlockEntry>, ShoplistError> {
    let mut line = raw.trim();
    if line.is_empty() {
        return Ok(None);
    }
    if let Some(rest) = line.strip_prefix('*').or_else(|| line.strip_prefix('-')) {
        line = rest.trim_start();
    }
    let malformed = || ShoplistError::MalformedLine {
        line_number,
        content: raw.to_string(),
    };
    let (left, right) = line.split_once(':').ok_or_else(malformed)?;
    let category = left.trim();
    if category.is_empty() {
        return Err(malformed());
    }
    let payload = match kind {
        BlockKind::Counts => {
            let count = right
                .trim()
                .parse::<u32>()
                .ok()
                .filter(|c| *c > 0)
                .ok_or_else(|| ShoplistError::NonIntegerCount {
                    line_number,
                    content: raw.to_string(),
                })?;
            BlockPayload::Count(count)
        }
        BlockKind::Attributes | BlockKind::Condition => BlockPayload::Phrases(split_phrases(right)),
    };
    Ok(Some(BlockEntry {
        category: category.to_string(),
        payload,
    }))
}

/// Parses one template block; the first bad line aborts the parse.
pub fn parse_block(kind: BlockKind, text: &str) -> Result<Vec<BlockEntry>, ShoplistError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(entry) = parse_line(kind, i + 1, line)? {
            out.push(entry);
        }
    }
    Ok(out)
}

/// Like [`parse_block`] but keeps going past bad lines.
pub fn parse_block_lenient(kind: BlockKind, text: &str) -> LenientBlock {
    let mut block = LenientBlock::default();
    for (i, line) in text.lines().enumerate() {
        match parse_line(kind, i + 1, line) {
            Ok(Some(entry)) => block.entries.push(entry),
            Ok(None) => {}
            Err(e) => block.errors.push(e),
        }
    }
    block
}

pub fn parse_counts(text: &str) -> Result<Vec<(String, u32)>, ShoplistError> {
    Ok(parse_block(BlockKind::Counts, text)?.into_iter().map(BlockEntry::into_count).collect())
}

pub fn parse_phrases(text: &str) -> Result<Vec<(String, Vec<String>)>, ShoplistError> {
    Ok(parse_block(BlockKind::Attributes, text)?
        .into_iter()
        .map(BlockEntry::into_phrases)
        .collect())
}

impl BlockEntry {
    pub(crate) fn into_count(self) -> (String, u32) {
        match self.payload {
            BlockPayload::Count(c) => (self.category, c),
            BlockPayload::Phrases(_) => (self.category, 1),
        }
    }

    pub(crate) fn into_phrases(self) -> (String, Vec<String>) {
        match self.payload {
            BlockPayload::Phrases(p) => (self.category, p),
            BlockPayload::Count(_) => (self.category, Vec::new()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_from_anchor_template() {
        let parsed = parse_counts("* Tables : 1\n* Chairs : 4").unwrap();
        assert_eq!(parsed, vec![("Tables".to_string(), 1), ("Chairs".to_string(), 4)]);
    }

    #[test]
    fn attributes_split_on_commas_and_periods() {
        let parsed = parse_phrases("* Table : country style farmhouse table, oakwood and dark brown.").unwrap();
        assert_eq!(
            parsed,
            vec![(
                "Table".to_string(),
                vec!["country style farmhouse table".to_string(), "oakwood and dark brown".to_string()]
            )]
        );
        let joined = parse_phrases("throne: with intricate carvings of ocean life.glossy, polished finish.").unwrap();
        assert_eq!(joined[0].1, ["with intricate carvings of ocean life", "glossy", "polished finish"]);
    }

    #[test]
    fn empty_input_is_empty() {
        assert_eq!(parse_block(BlockKind::Condition, "").unwrap(), vec![]);
        assert_eq!(parse_block(BlockKind::Condition, "\n  \n").unwrap(), vec![]);
    }

    #[test]
    fn missing_colon_is_malformed() {
        let err = parse_block(BlockKind::Counts, "* Chairs four").unwrap_err();
        assert_eq!(
            err,
            ShoplistError::MalformedLine {
                line_number: 1,
                content: "* Chairs four".into()
            }
        );
    }

    #[test]
    fn bad_counts_rejected() {
        for rhs in ["four", "0", "-2", "1.5", ""] {
            let text = format!("\n* Chairs : {rhs}");
            assert!(
                matches!(parse_counts(&text), Err(ShoplistError::NonIntegerCount { line_number: 2, .. })),
                "{rhs}"
            );
        }
    }

    #[test]
    fn dash_bullets_and_bare_lines_accepted() {
        let parsed = parse_counts("- Bar stools : 2\nBar : 1").unwrap();
        assert_eq!(parsed, vec![("Bar stools".into(), 2), ("Bar".into(), 1)]);
    }

    #[test]
    fn empty_category_is_malformed() {
        assert!(matches!(parse_phrases("* : red"), Err(ShoplistError::MalformedLine { .. })));
    }

    #[test]
    fn lenient_keeps_good_lines() {
        let block = parse_block_lenient(BlockKind::Counts, "* Tables : 1\nnonsense\n* Chairs : 4");
        assert_eq!(block.entries.len(), 2);
        assert_eq!(block.errors.len(), 1);
    }

    #[test]
    fn category_case_stored_verbatim() {
        let parsed = parse_counts("* Bar Stools : 2").unwrap();
        assert_eq!(parsed[0].0, "Bar Stools");
    }
}
