//! Joins the counts, attribute and condition passes into childless items.

use std::collections::HashMap;

use super::ShoppingItem;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeOutcome {
    pub items: Vec<ShoppingItem>,
    pub warnings: Vec<String>,
}

/// Case-insensitive join keyed by (category, occurrence index), so the k-th
/// "pillows" in the counts pass pairs with the k-th "pillows" in the
/// annotation passes.
struct OccurrenceIndex<'a> {
    slots: HashMap<String, Vec<(usize, &'a [String])>>,
    used: Vec<bool>,
}

impl<'a> OccurrenceIndex<'a> {
    fn new(entries: &'a [(String, Vec<String>)]) -> Self {
        let mut slots: HashMap<String, Vec<(usize, &'a [String])>> = HashMap::new();
        for (i, (cat, phrases)) in entries.iter().enumerate() {
            slots.entry(cat.to_lowercase()).or_default().push((i, phrases.as_slice()));
        }
        Self {
            slots,
            used: vec![false; entries.len()],
        }
    }

    fn take(&mut self, category: &str, occurrence: usize) -> Option<&'a [String]> {
        let (idx, phrases) = *self.slots.get(&category.to_lowercase())?.get(occurrence)?;
        self.used[idx] = true;
        Some(phrases)
    }
}

pub fn merge_annotations(
    counts: &[(String, u32)],
    attrs: &[(String, Vec<String>)],
    conds: &[(String, Vec<String>)],
) -> MergeOutcome {
    let mut attr_index = OccurrenceIndex::new(attrs);
    let mut cond_index = OccurrenceIndex::new(conds);
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = MergeOutcome::default();

    for (category, count) in counts {
        let occ = seen.entry(category.to_lowercase()).or_insert(0);
        let mut item = ShoppingItem::new(category.clone()).with_count((*count).max(1));
        match attr_index.take(category, *occ) {
            Some(p) => item.attributes = p.to_vec(),
            None => out.warnings.push(format!("no attributes for {category:?}")),
        }
        match cond_index.take(category, *occ) {
            Some(p) => item.condition = p.to_vec(),
            None => out.warnings.push(format!("no condition for {category:?}")),
        }
        *occ += 1;
        out.items.push(item);
    }

    // Annotated categories the counts pass never produced.
    let extra_start = out.items.len();
    let mut extra_seen: HashMap<String, usize> = HashMap::new();
    for (i, (category, phrases)) in attrs.iter().enumerate() {
        if attr_index.used[i] {
            continue;
        }
        out.warnings.push(format!("{category:?} annotated but not counted; added with count 1"));
        *extra_seen.entry(category.to_lowercase()).or_insert(0) += 1;
        out.items.push(ShoppingItem::new(category.clone()).with_attributes(phrases.clone()));
    }
    let mut extra_cond_seen: HashMap<String, usize> = HashMap::new();
    for (i, (category, phrases)) in conds.iter().enumerate() {
        if cond_index.used[i] {
            continue;
        }
        let key = category.to_lowercase();
        let occ = extra_cond_seen.entry(key.clone()).or_insert(0);
        // Pair with an attributes-only extra of the same category when one exists.
        let target = out.items[extra_start..]
            .iter()
            .enumerate()
            .filter(|(_, it)| it.category.to_lowercase() == key)
            .nth(*occ)
            .map(|(j, _)| extra_start + j);
        *occ += 1;
        match target {
            Some(j) => out.items[j].condition = phrases.clone(),
            None => {
                out.warnings.push(format!("{category:?} annotated but not counted; added with count 1"));
                out.items.push(ShoppingItem::new(category.clone()).with_condition(phrases.clone()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn joins_three_passes() {
        let out = merge_annotations(
            &[("Bar".into(), 1)],
            &[("Bar".into(), s(&["white marble"]))],
            &[("Bar".into(), s(&["slight signs of wear"]))],
        );
        assert_eq!(
            out.items,
            vec![ShoppingItem::new("Bar")
                .with_attributes(["white marble"])
                .with_condition(["slight signs of wear"])]
        );
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn missing_annotations_warn() {
        let out = merge_annotations(&[("Bar".into(), 1)], &[], &[]);
        assert_eq!(out.items, vec![ShoppingItem::new("Bar")]);
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn case_insensitive_match_keeps_count_spelling() {
        let out = merge_annotations(&[("Bar stools".into(), 2)], &[("bar STOOLS".into(), s(&["velvet"]))], &[]);
        assert_eq!(out.items[0].category, "Bar stools");
        assert_eq!(out.items[0].count, 2);
        assert_eq!(out.items[0].attributes, ["velvet"]);
    }

    #[test]
    fn uncounted_annotations_appended() {
        let out = merge_annotations(
            &[("Table".into(), 1)],
            &[("Table".into(), s(&["oak"])), ("Lamp".into(), s(&["brass"]))],
            &[("Lamp".into(), s(&["dusty"])), ("Rug".into(), s(&["worn"]))],
        );
        let cats: Vec<_> = out.items.iter().map(|i| i.category.as_str()).collect();
        assert_eq!(cats, ["Table", "Lamp", "Rug"]);
        assert_eq!(out.items[1].condition, ["dusty"]);
        assert_eq!(out.items[2].count, 1);
    }

    #[test]
    fn duplicate_categories_pair_by_occurrence() {
        let out = merge_annotations(
            &[("pillows".into(), 1), ("books".into(), 1), ("pillows".into(), 1)],
            &[("pillows".into(), s(&["navy"])), ("pillows".into(), s(&["gold"]))],
            &[],
        );
        assert_eq!(out.items[0].attributes, ["navy"]);
        assert_eq!(out.items[2].attributes, ["gold"]);
    }
}
