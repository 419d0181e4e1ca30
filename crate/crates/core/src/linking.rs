//! Entity mention detection over a token trie of KB surface names, literal
//! extraction, relation-aware pruning, popularity selection and masking.
//!
//! All offsets are byte offsets into the question string.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::kb::KnowledgeBase;
use crate::logical_form::Literal;

/// A token with its byte range; the text is already lowercased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Maximal alphanumeric runs, lowercased.
pub fn tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Token {
                    start: s,
                    end: i,
                    text: text[s..i].to_lowercase(),
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            start: s,
            end: text.len(),
            text: text[s..].to_lowercase(),
        });
    }
    out
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<String, usize>,
    /// Lowercased full name -> owning entities.
    names: BTreeMap<String, BTreeSet<String>>,
}

/// Token-level trie over entity surface names; lookups are
/// case-insensitive.
#[derive(Debug, Clone)]
pub struct NameTrie {
    nodes: Vec<TrieNode>,
}

impl Default for NameTrie {
    fn default() -> Self {
        NameTrie {
            nodes: vec![TrieNode::default()],
        }
    }
}

impl NameTrie {
    pub fn build(kb: &KnowledgeBase) -> NameTrie {
        let mut t = NameTrie::default();
        for e in kb.entities() {
            for name in &e.names {
                t.insert(name, &e.id);
            }
        }
        t
    }

    pub fn insert(&mut self, name: &str, entity: &str) {
        let toks = tokens(name);
        if toks.is_empty() {
            return;
        }
        let mut node = 0;
        for tok in toks {
            node = match self.nodes[node].children.get(&tok.text) {
                Some(&n) => n,
                None => {
                    self.nodes.push(TrieNode::default());
                    let n = self.nodes.len() - 1;
                    self.nodes[node].children.insert(tok.text, n);
                    n
                }
            };
        }
        self.nodes[node]
            .names
            .entry(name.to_lowercase())
            .or_default()
            .insert(entity.to_string());
    }

    /// Entities owning exactly this name (case-insensitive).
    pub fn lookup(&self, name: &str) -> Option<&BTreeSet<String>> {
        let mut node = 0;
        for tok in tokens(name) {
            node = *self.nodes[node].children.get(&tok.text)?;
        }
        self.nodes[node].names.get(&name.to_lowercase())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Longest-leftmost, non-overlapping, token-aligned matches.
    pub fn detect(&self, question: &str) -> Vec<MentionSpan> {
        let toks = tokens(question);
        let mut out = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            let mut node = 0;
            let mut best: Option<(usize, &BTreeSet<String>)> = None;
            for (j, tok) in toks.iter().enumerate().skip(i) {
                let Some(&next) = self.nodes[node].children.get(&tok.text) else {
                    break;
                };
                node = next;
                let slice = question[toks[i].start..tok.end].to_lowercase();
                if let Some(ents) = self.nodes[node].names.get(&slice) {
                    best = Some((j, ents));
                }
            }
            match best {
                Some((j, ents)) => {
                    let (start, end) = (toks[i].start, toks[j].end);
                    out.push(MentionSpan {
                        start,
                        end,
                        text: question[start..end].to_string(),
                        candidates: ents.iter().cloned().collect(),
                    });
                    i = j + 1;
                }
                None => i += 1,
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LiteralSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub value: Literal,
}

static DATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d{4}-\d{2}-\d{2}\b").unwrap());
static DECIMAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\b\d+\.\d+\b").unwrap());
static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(1[0-9]{3}|20[0-9]{2})\b").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\b\d+\b").unwrap());

/// Dates, decimals, years and integers, in that priority; a later pattern
/// never claims bytes an earlier one matched. Output is in text order.
pub fn extract_literals(question: &str) -> Vec<LiteralSpan> {
    let mut out: Vec<LiteralSpan> = Vec::new();
    let patterns: [(&Regex, &str); 4] = [
        (&DATE, "date"),
        (&DECIMAL, "float"),
        (&YEAR, "year"),
        (&INTEGER, "int"),
    ];
    for (re, dt) in patterns {
        for m in re.find_iter(question) {
            let overlaps = out.iter().any(|s| m.start() < s.end && s.start < m.end());
            if overlaps {
                continue;
            }
            out.push(LiteralSpan {
                start: m.start(),
                end: m.end(),
                text: m.as_str().to_string(),
                value: Literal::new(m.as_str(), dt),
            });
        }
    }
    out.sort_by_key(|s| s.start);
    out
}

/// Keeps the entities incident to some relation of `r_q` (or its reverse).
pub fn prune_by_relations(candidates: &[String], r_q: &[String], kb: &KnowledgeBase) -> Vec<String> {
    if r_q.is_empty() {
        log::warn!("no candidate relations; every entity candidate is pruned");
        return Vec::new();
    }
    let mut allowed: BTreeSet<&str> = r_q.iter().map(String::as_str).collect();
    for r in r_q {
        if let Ok(Some(rev)) = kb.reverse(r) {
            allowed.insert(rev);
        }
    }
    candidates
        .iter()
        .filter(|e| {
            kb.incident_relations(e)
                .is_ok_and(|inc| inc.iter().any(|r| allowed.contains(r.as_str())))
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("no surviving candidate for mention `{0}`")]
    NoCandidate(String),
    #[error("spans {0:?} and {1:?} overlap")]
    Overlap((usize, usize), (usize, usize)),
    #[error("span {0:?} is out of bounds or not on character boundaries")]
    BadSpan((usize, usize)),
}

/// Highest popularity, ties broken by the smallest id.
pub fn select_entity(mention: &str, candidates: &[String], kb: &KnowledgeBase) -> Result<String, LinkError> {
    candidates
        .iter()
        .max_by(|a, b| {
            let pa = kb.entity(a).map_or(0, |e| e.popularity);
            let pb = kb.entity(b).map_or(0, |e| e.popularity);
            pa.cmp(&pb).then_with(|| b.cmp(a))
        })
        .cloned()
        .ok_or_else(|| LinkError::NoCandidate(mention.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub placeholder: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Replaces spans by `<entity0>`, `<entity1>`, ... left to right.
pub fn mask_mentions(
    question: &str,
    spans: &[(usize, usize)],
) -> Result<(String, Vec<MaskEntry>), LinkError> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for &(s, e) in &sorted {
        if s >= e || e > question.len() || !question.is_char_boundary(s) || !question.is_char_boundary(e) {
            return Err(LinkError::BadSpan((s, e)));
        }
    }
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(LinkError::Overlap(w[0], w[1]));
        }
    }
    let mut out = String::with_capacity(question.len());
    let mut entries = Vec::new();
    let mut last = 0;
    for (i, &(s, e)) in sorted.iter().enumerate() {
        let placeholder = format!("<entity{i}>");
        out.push_str(&question[last..s]);
        out.push_str(&placeholder);
        entries.push(MaskEntry {
            placeholder,
            start: s,
            end: e,
            text: question[s..e].to_string(),
        });
        last = e;
    }
    out.push_str(&question[last..]);
    Ok((out, entries))
}

/// Inverse of [`mask_mentions`].
pub fn unmask(masked: &str, entries: &[MaskEntry]) -> String {
    let mut out = String::with_capacity(masked.len());
    let mut rest = masked;
    for e in entries {
        match rest.find(&e.placeholder) {
            Some(i) => {
                out.push_str(&rest[..i]);
                out.push_str(&e.text);
                rest = &rest[i + e.placeholder.len()..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkedMention {
    pub span: MentionSpan,
    /// Candidates left after relation-aware pruning.
    pub surviving: Vec<String>,
    pub entity: Option<String>,
}

/// Everything the later stages need from linking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkResult {
    pub mentions: Vec<LinkedMention>,
    pub literals: Vec<LiteralSpan>,
    /// Selected entities in mention order (E_q).
    pub entities: Vec<String>,
    /// The question with every linked mention masked.
    pub masked: String,
    pub mask: Vec<MaskEntry>,
}

/// Detect, prune against `r_q`, select and mask.
pub fn link(question: &str, trie: &NameTrie, r_q: &[String], kb: &KnowledgeBase) -> LinkResult {
    let literals = extract_literals(question);
    let mut mentions = Vec::new();
    for span in trie.detect(question) {
        // a number that happens to be a name is treated as a literal
        if literals.iter().any(|l| l.start < span.end && span.start < l.end) {
            continue;
        }
        let surviving = prune_by_relations(&span.candidates, r_q, kb);
        let entity = select_entity(&span.text, &surviving, kb).ok();
        if entity.is_none() {
            log::debug!("mention `{}` has no connected candidate", span.text);
        }
        mentions.push(LinkedMention {
            span,
            surviving,
            entity,
        });
    }
    let linked: Vec<(usize, usize)> = mentions
        .iter()
        .filter(|m| m.entity.is_some())
        .map(|m| (m.span.start, m.span.end))
        .collect();
    let (masked, mask) = mask_mentions(question, &linked).expect("detected spans never overlap");
    let entities = mentions.iter().filter_map(|m| m.entity.clone()).collect();
    LinkResult {
        mentions,
        literals,
        entities,
        masked,
        mask,
    }
}
