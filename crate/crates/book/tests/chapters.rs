//! Every chapter listed in the book's table of contents must be compiled
//! as doc-tests by this crate, and vice versa.

use std::collections::BTreeSet;

const SUMMARY: &str = include_str!("../../../book/src/SUMMARY.md");
const LIB: &str = include_str!("../src/lib.rs");

fn summary_chapters() -> BTreeSet<String> {
    SUMMARY
        .lines()
        .filter_map(|l| {
            let start = l.find("](")? + 2;
            let end = start + l[start..].find(')')?;
            Some(l[start..end].to_string())
        })
        .collect()
}

fn included_chapters() -> BTreeSet<String> {
    LIB.lines()
        .filter_map(|l| {
            let rest = l.split("book/src/").nth(1)?;
            Some(rest[..rest.find('"')?].to_string())
        })
        .collect()
}

#[test]
fn summary_and_doc_modules_agree() {
    let summary = summary_chapters();
    assert!(!summary.is_empty());
    assert_eq!(summary, included_chapters());
}

#[test]
fn chapters_exist_and_have_a_title() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src");
    for chapter in summary_chapters() {
        let text = std::fs::read_to_string(root.join(&chapter)).unwrap();
        assert!(text.starts_with("# "), "{chapter} has no title");
    }
}
