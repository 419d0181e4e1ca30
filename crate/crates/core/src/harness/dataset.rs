//! JSON-lines datasets: `{"qid", "question", "s_expression", "answers"}`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::exec::execute;
use crate::kb::KnowledgeBase;
use crate::logical_form::{ParseError, SExpr};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub qid: String,
    pub question: String,
    pub s_expression: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl DatasetItem {
    pub fn gold(&self) -> Result<SExpr, ParseError> {
        SExpr::parse(&self.s_expression)
    }

    /// The recorded answers, or those of the gold expression.
    pub fn gold_answers(&self, kb: &KnowledgeBase) -> Option<BTreeSet<String>> {
        match &self.answers {
            Some(a) => Some(a.iter().cloned().collect()),
            None => execute(&self.gold().ok()?, kb).ok().map(|a| a.to_strings()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {source}")]
    Json {
        source_name: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn parse_dataset(text: &str, source_name: &str) -> Result<Vec<DatasetItem>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| DatasetError::Json {
                source_name: source_name.to_string(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetItem>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, &path.display().to_string())
}

pub fn to_jsonl(items: &[DatasetItem]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("items serialize") + "\n")
        .collect()
}

/// Items whose gold does not parse, does not execute, or disagrees with
/// the recorded answers; `(qid, problem)`.
pub fn verify_gold(items: &[DatasetItem], kb: &KnowledgeBase) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for item in items {
        let problem = match item.gold() {
            Err(e) => Some(format!("gold does not parse: {e}")),
            Ok(g) => match execute(&g, kb) {
                Err(e) => Some(format!("gold does not execute: {e}")),
                Ok(a) => match &item.answers {
                    Some(want) if a.to_strings() != want.iter().cloned().collect() => {
                        Some("answers differ from gold execution".to_string())
                    }
                    _ => None,
                },
            },
        };
        if let Some(p) = problem {
            out.push((item.qid.clone(), p));
        }
    }
    out
}
