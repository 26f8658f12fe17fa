use std::path::PathBuf;

use curator_core::shoplist::{parse_human, read_list_file, serialize_human, SceneDescription, ShoppingItem, ShoppingList};
use proptest::prelude::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/shopping_lists")
}

#[derive(serde::Deserialize)]
struct IndexEntry {
    file: String,
    scene: String,
    items: usize,
    anchors: usize,
}

fn index() -> Vec<IndexEntry> {
    let text = std::fs::read_to_string(fixtures().join("index.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn all_twenty_lists_parse_with_expected_sizes() {
    let entries = index();
    assert_eq!(entries.len(), 20);
    for entry in &entries {
        let list = read_list_file(fixtures().join(&entry.file)).unwrap();
        assert_eq!(list.scene.as_str(), entry.scene);
        assert_eq!(list.flatten().len(), entry.items, "{}", entry.file);
        assert_eq!(list.anchors.len(), entry.anchors, "{}", entry.file);
        assert!(list.validate(Some(1)).is_ok());
    }
}

#[test]
fn poseidon_flattens_to_27() {
    let list = read_list_file(fixtures().join("poseidon_living_room.txt")).unwrap();
    assert_eq!(list.flatten().len(), 27);
    let first = list.flatten()[0];
    assert_eq!(first.category, "throne");
    assert_eq!(first.attributes, ["with intricate carvings of ocean life"]);
    assert_eq!(first.condition, ["glossy", "polished finish"]);
    // Duplicates across branches are preserved.
    let pillows = list.flatten().iter().filter(|i| i.category == "pillows").count();
    assert_eq!(pillows, 2);
}

#[test]
fn fixtures_round_trip() {
    let mut files: Vec<String> = index().into_iter().map(|e| e.file).collect();
    files.push("kings_hand_office.txt".into());
    for file in files {
        let list = read_list_file(fixtures().join(&file)).unwrap();
        let text = serialize_human(&list).unwrap();
        let back = parse_human(&text, list.scene.clone()).unwrap();
        assert!(back.structurally_eq(&list), "{file}");
        // Second pass is a fixed point at the text level too.
        assert_eq!(serialize_human(&back).unwrap(), text, "{file}");
    }
}

#[test]
fn kings_hand_hierarchy() {
    let list = read_list_file(fixtures().join("kings_hand_office.txt")).unwrap();
    assert_eq!(list.anchors.len(), 5);
    assert_eq!(list.depth(), 1);
    let cats: Vec<_> = list.anchors.iter().map(|a| a.category.as_str()).collect();
    assert_eq!(cats, ["desk", "chairs", "sofa", "rug", "fireplace"]);
    assert_eq!(list.anchors[0].children.len(), 5);
}

fn phrase() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9' -]{0,18}[a-z]"
}

fn item(depth: u32) -> BoxedStrategy<ShoppingItem> {
    let leaf = (
        "[a-z][a-z -]{0,14}[a-z]",
        1u32..20,
        prop::collection::vec(phrase(), 0..4),
        prop::collection::vec(phrase(), 0..4),
    )
        .prop_map(|(category, count, attributes, condition)| ShoppingItem {
            category,
            count,
            attributes,
            condition,
            children: vec![],
        });
    if depth == 0 {
        leaf.boxed()
    } else {
        (leaf, prop::collection::vec(item(depth - 1), 0..4))
            .prop_map(|(mut it, children)| {
                it.children = children;
                it
            })
            .boxed()
    }
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(anchors in prop::collection::vec(item(3), 1..=8)) {
        let scene = SceneDescription::new("a generated scene").unwrap();
        let list = ShoppingList::new(scene.clone(), anchors).unwrap();
        let text = serialize_human(&list).unwrap();
        let back = parse_human(&text, scene).unwrap();
        prop_assert!(back.structurally_eq(&list), "{}", text);
        prop_assert_eq!(back.flatten().len(), list.node_count());
    }
}
