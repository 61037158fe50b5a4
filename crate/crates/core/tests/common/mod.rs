#![allow(dead_code)]

use std::fs::File;
use std::path::PathBuf;

use ontosearch_core::eval::parse_corpus;
use ontosearch_core::{load_kb, KnowledgeBase, QueryRecord};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn acme() -> KnowledgeBase {
    load_kb(File::open(fixture("acme-kb.json")).unwrap()).unwrap()
}

pub fn corpus(name: &str) -> Vec<QueryRecord> {
    parse_corpus(File::open(fixture(name)).unwrap()).unwrap()
}
