#![allow(dead_code)]

pub mod models;
pub mod oracles;

use std::path::PathBuf;

use comment_update::corpus::{
    filter, ingest, read_records_file, Example, FilterOutcome, RawRecord,
};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn fixture_outcome() -> FilterOutcome {
    filter(ingest(
        read_records_file(&fixture_path("corpus.jsonl")).expect("fixture corpus"),
    ))
}

/// Filtered fixture examples.
pub fn fixture() -> Vec<Example> {
    fixture_outcome().kept
}

/// Ten renamed-return examples; each new comment word occurs once in the
/// comments and also in the new method body.
pub fn copy_fixture() -> Vec<Example> {
    const WORDS: [(&str, &str); 10] = [
        ("width", "height"),
        ("count", "total"),
        ("name", "label"),
        ("size", "length"),
        ("speed", "velocity"),
        ("index", "offset"),
        ("owner", "author"),
        ("price", "cost"),
        ("depth", "level"),
        ("color", "shade"),
    ];
    let records = WORDS.iter().enumerate().map(|(i, (old, new))| RawRecord {
        id: format!("copy{i}"),
        project: format!("p{}", i % 3),
        commit_before: String::new(),
        commit_after: String::new(),
        m_old: format!("public int get() {{ return {old}; }}"),
        m_new: format!("public int get() {{ return {new}; }}"),
        c_old: format!("@return the {old} value."),
        c_new: format!("@return the {new} value."),
    });
    let kept = filter(ingest(records)).kept;
    assert_eq!(kept.len(), WORDS.len());
    kept
}
