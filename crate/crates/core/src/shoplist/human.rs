//! The human-editable list format.
//!
//! ```text
//! # scene: Poseidon's living room
//! * throne : with intricate carvings of ocean life. glossy, polished finish.
//!   * fur rug : ivory and white with a hint of blue. soft and fluffy. x2
//! ```
//!
//! One item per line, two spaces of indentation per depth level. Left of the
//! first colon is the category. On the right, the first sentence holds the
//! comma-separated attributes and everything after the first period is the
//! condition (commas and periods both split condition phrases). A
//! condition-only item starts its right-hand side with a bare period
//! (`* coal bucket : . clean and unscratched.`). A trailing ` x<count>`
//! records counts above one. Blank lines and `#` lines are ignored, except
//! that a `# scene:` line names the scene when a file is read standalone.

use std::path::Path;

use super::block::split_phrases;
use super::{SceneDescription, ShoplistError, ShoppingItem, ShoppingList};

pub const SCENE_HEADER: &str = "# scene:";

fn check_phrase(phrase: &str) -> Result<(), ShoplistError> {
    if phrase.contains([',', '.', '\n', '\r']) {
        return Err(ShoplistError::InvalidText {
            path: Default::default(),
            reason: format!("phrase {phrase:?} contains a list delimiter"),
        });
    }
    Ok(())
}

fn write_item(item: &ShoppingItem, depth: usize, out: &mut String) -> Result<(), ShoplistError> {
    if item.category.contains(':') {
        return Err(ShoplistError::InvalidText {
            path: Default::default(),
            reason: format!("category {:?} contains ':'", item.category),
        });
    }
    for phrase in item.attributes.iter().chain(&item.condition) {
        check_phrase(phrase)?;
    }
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str("* ");
    out.push_str(&item.category);
    out.push_str(" :");
    match (item.attributes.is_empty(), item.condition.is_empty()) {
        (true, true) => {}
        (false, true) => {
            out.push(' ');
            out.push_str(&item.attributes.join(", "));
            out.push('.');
        }
        (true, false) => {
            out.push_str(" . ");
            out.push_str(&item.condition.join(", "));
            out.push('.');
        }
        (false, false) => {
            out.push(' ');
            out.push_str(&item.attributes.join(", "));
            out.push_str(". ");
            out.push_str(&item.condition.join(", "));
            out.push('.');
        }
    }
    if item.count > 1 {
        out.push_str(&format!(" x{}", item.count));
    }
    out.push('\n');
    for child in &item.children {
        write_item(child, depth + 1, out)?;
    }
    Ok(())
}

/// Renders a list, starting with its `# scene:` header.
pub fn serialize_human(list: &ShoppingList) -> Result<String, ShoplistError> {
    list.validate(None)?;
    let mut out = format!("{SCENE_HEADER} {}\n", list.scene);
    for anchor in &list.anchors {
        write_item(anchor, 0, &mut out)?;
    }
    Ok(out)
}

/// Splits a trailing ` x<count>` token off the right-hand side.
fn split_count_suffix(rhs: &str) -> (&str, Option<&str>) {
    let trimmed = rhs.trim_end();
    let start = trimmed.rfind(char::is_whitespace).map_or(0, |i| i + 1);
    let token = &trimmed[start..];
    match token.strip_prefix('x') {
        Some(digits) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => (&trimmed[..start], Some(digits)),
        _ => (rhs, None),
    }
}

fn parse_item_line(line_number: usize, raw: &str) -> Result<(usize, ShoppingItem), ShoplistError> {
    let malformed = || ShoplistError::MalformedLine {
        line_number,
        content: raw.to_string(),
    };
    let spaces = raw.len() - raw.trim_start_matches(' ').len();
    if spaces % 2 != 0 || raw[spaces..].starts_with('\t') {
        return Err(malformed());
    }
    let body = raw[spaces..].trim_end();
    let body = body
        .strip_prefix("* ")
        .or_else(|| body.strip_prefix("- "))
        .ok_or_else(malformed)?;
    let (left, right) = body.split_once(':').ok_or_else(malformed)?;
    let category = left.trim();
    if category.is_empty() {
        return Err(malformed());
    }
    let (rhs, count) = split_count_suffix(right);
    let count = match count {
        None => 1,
        Some(digits) => digits.parse::<u32>().ok().filter(|c| *c > 0).ok_or_else(malformed)?,
    };
    let rhs = rhs.trim();
    let (attributes, condition) = match rhs.split_once('.') {
        None => (split_phrases(rhs), Vec::new()),
        Some((attrs, conds)) => (split_phrases(attrs), split_phrases(conds)),
    };
    let item = ShoppingItem {
        category: category.to_string(),
        count,
        attributes,
        condition,
        children: Vec::new(),
    };
    Ok((spaces / 2, item))
}

/// Parses the human format. The `scene` argument wins over any header line.
pub fn parse_human(text: &str, scene: SceneDescription) -> Result<ShoppingList, ShoplistError> {
    let mut anchors: Vec<ShoppingItem> = Vec::new();
    // Open chain of ancestors for the line being read; stack[d] sits at depth d.
    let mut stack: Vec<ShoppingItem> = Vec::new();

    fn close_to(stack: &mut Vec<ShoppingItem>, anchors: &mut Vec<ShoppingItem>, depth: usize) {
        while stack.len() > depth {
            let done = stack.pop().expect("non-empty");
            match stack.last_mut() {
                Some(parent) => parent.children.push(done),
                None => anchors.push(done),
            }
        }
    }

    for (i, raw) in text.lines().enumerate() {
        let line_number = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (depth, item) = parse_item_line(line_number, raw)?;
        if depth > stack.len() {
            return Err(ShoplistError::IndentJump { line_number });
        }
        close_to(&mut stack, &mut anchors, depth);
        stack.push(item);
    }
    close_to(&mut stack, &mut anchors, 0);
    ShoppingList::new(scene, anchors)
}

/// Parses a standalone document whose scene comes from its `# scene:` line.
pub fn parse_list_document(text: &str) -> Result<ShoppingList, ShoplistError> {
    let scene = text
        .lines()
        .find_map(|l| l.trim().strip_prefix(SCENE_HEADER))
        .ok_or(ShoplistError::EmptyScene)?;
    parse_human(text, SceneDescription::new(scene)?)
}

#[derive(Debug, thiserror::Error)]
pub enum ListFileError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: ShoplistError },
}

pub fn read_list_file(path: impl AsRef<Path>) -> Result<ShoppingList, ListFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ListFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_list_document(&text).map_err(|source| ListFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_list_file(path: impl AsRef<Path>, list: &ShoppingList) -> Result<(), ListFileError> {
    let path = path.as_ref();
    let text = serialize_human(list).map_err(|source| ListFileError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text).map_err(|source| ListFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> SceneDescription {
        SceneDescription::new("Poseidon's living room").unwrap()
    }

    fn throne() -> ShoppingItem {
        ShoppingItem::new("throne")
            .with_attributes(["with intricate carvings of ocean life"])
            .with_condition(["glossy", "polished finish"])
    }

    #[test]
    fn throne_line() {
        let list = ShoppingList::new(scene(), vec![throne()]).unwrap();
        let text = serialize_human(&list).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "* throne : with intricate carvings of ocean life. glossy, polished finish."
        );
    }

    #[test]
    fn empty_list_rejected() {
        let list = ShoppingList {
            scene: scene(),
            anchors: vec![],
            provenance: Default::default(),
        };
        assert_eq!(serialize_human(&list).unwrap_err(), ShoplistError::EmptyList);
    }

    #[test]
    fn annotation_shapes_round_trip() {
        let list = ShoppingList::new(
            scene(),
            vec![
                throne().with_count(3).with_children(vec![
                    ShoppingItem::new("coal bucket").with_condition(["clean and unscratched"]),
                    ShoppingItem::new("rug").with_attributes(["blue", "wool"]),
                    ShoppingItem::new("chairs").with_count(4),
                ]),
                ShoppingItem::new("lamp"),
            ],
        )
        .unwrap();
        let text = serialize_human(&list).unwrap();
        assert!(text.contains("  * coal bucket : . clean and unscratched.\n"));
        assert!(text.contains("  * chairs : x4\n"));
        assert!(text.contains("* lamp :\n"));
        let back = parse_human(&text, scene()).unwrap();
        assert!(back.structurally_eq(&list));
    }

    #[test]
    fn reads_appendix_style_lines() {
        let text = "* throne: with intricate carvings of ocean life.glossy, polished finish.\n  * coal bucket: clean and unscratched.\n";
        let list = parse_human(text, scene()).unwrap();
        assert_eq!(list.anchors[0].attributes, ["with intricate carvings of ocean life"]);
        assert_eq!(list.anchors[0].condition, ["glossy", "polished finish"]);
        assert_eq!(list.anchors[0].children[0].attributes, ["clean and unscratched"]);
    }

    #[test]
    fn indent_jump_rejected() {
        let err = parse_human("* a :\n    * b :\n", scene()).unwrap_err();
        assert_eq!(err, ShoplistError::IndentJump { line_number: 2 });
        let err = parse_human("  * a :\n", scene()).unwrap_err();
        assert_eq!(err, ShoplistError::IndentJump { line_number: 1 });
    }

    #[test]
    fn malformed_lines_rejected() {
        for (text, line) in [("* a :\n* no colon here\n", 2), ("* a :\n   * odd indent :\n", 2), ("just text : x\n", 1), ("* : red.\n", 1)] {
            match parse_human(text, scene()) {
                Err(ShoplistError::MalformedLine { line_number, .. }) => assert_eq!(line_number, line, "{text:?}"),
                other => panic!("{text:?} → {other:?}"),
            }
        }
    }

    #[test]
    fn delimiter_in_phrase_is_unrepresentable() {
        let list = ShoppingList::new(scene(), vec![ShoppingItem::new("vase").with_attributes(["1.5 feet tall"])]).unwrap();
        assert!(matches!(serialize_human(&list), Err(ShoplistError::InvalidText { .. })));
    }

    #[test]
    fn header_supplies_scene() {
        let list = parse_list_document("# scene: a saloon\n* bar : oak.\n").unwrap();
        assert_eq!(list.scene.as_str(), "a saloon");
        assert!(parse_list_document("* bar : oak.\n").is_err());
    }

    #[test]
    fn count_suffix_only_at_end() {
        let list = parse_human("* photo frame : for a 4x6 photo. dusty.\n", scene()).unwrap();
        assert_eq!(list.anchors[0].count, 1);
        assert_eq!(list.anchors[0].attributes, ["for a 4x6 photo"]);
        let list = parse_human("* chairs : velvet. worn. x12\n", scene()).unwrap();
        assert_eq!(list.anchors[0].count, 12);
        assert!(parse_human("* chairs : x0\n", scene()).is_err());
    }
}
