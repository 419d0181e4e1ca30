//! Bundled railway/sports toy knowledge base and datasets.

use crate::harness::{parse_dataset, DatasetItem};
use crate::kb::{KnowledgeBase, LoadOptions};

pub const TOY_KB_TSV: &str = include_str!("../data/toy_kb.tsv");

/// The bundled toy KB. It is checked at build time by the test suite, so
/// loading cannot fail.
pub fn toy_kb() -> KnowledgeBase {
    KnowledgeBase::from_tsv(TOY_KB_TSV, LoadOptions::default()).expect("bundled toy KB is valid")
}

pub const TOY_DATASET_JSONL: &str = include_str!("../data/toy_dataset.jsonl");
pub const TOY_TRAIN_JSONL: &str = include_str!("../data/toy_train.jsonl");
pub const PILOT_TRAIN_JSONL: &str = include_str!("../data/pilot_train.jsonl");
pub const PILOT_COMP_JSONL: &str = include_str!("../data/pilot_comp.jsonl");
pub const PILOT_ZERO_JSONL: &str = include_str!("../data/pilot_zero.jsonl");

fn bundled(text: &str, name: &str) -> Vec<DatasetItem> {
    parse_dataset(text, name).expect("bundled dataset is valid")
}

/// The 30 evaluation questions over the toy KB.
pub fn toy_dataset() -> Vec<DatasetItem> {
    bundled(TOY_DATASET_JSONL, "toy_dataset.jsonl")
}

/// Training items whose inventory gives the toy dataset all three splits.
pub fn toy_train() -> Vec<DatasetItem> {
    bundled(TOY_TRAIN_JSONL, "toy_train.jsonl")
}

/// One-hop pilot data: `(train, compositional, zero-shot)`.
pub fn pilot_data() -> (Vec<DatasetItem>, Vec<DatasetItem>, Vec<DatasetItem>) {
    (
        bundled(PILOT_TRAIN_JSONL, "pilot_train.jsonl"),
        bundled(PILOT_COMP_JSONL, "pilot_comp.jsonl"),
        bundled(PILOT_ZERO_JSONL, "pilot_zero.jsonl"),
    )
}
