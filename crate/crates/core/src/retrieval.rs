//! Relation and class candidate retrieval: BM25 recall over component
//! descriptions followed by a pluggable semantic rerank.
//!
//! Descriptions use the marker format
//!
//! ```text
//! [D] railway.railway [N] terminuses [R] rail.railway_terminus   (relation)
//! [D] railway [N] railway                                         (class)
//! ```
//!
//! Markers are never tokenized; only the field values are.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::kb::{domain_group, KnowledgeBase};
use crate::logical_form::{Leaf, SExpr};

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[[A-Z]+\]").unwrap());

/// Lowercases, splits on anything that is not a letter or digit (so dots
/// and underscores separate tokens too) and folds plurals. Markers such as
/// `[D]` are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let stripped = MARKER.replace_all(text, " ");
    stripped
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| fold_plural(&t.to_lowercase()).to_string())
        .collect()
}

/// `coaches` → `coach`, `terminuses` → `terminus`, `railways` → `railway`;
/// short words and `-ss` endings are left alone.
pub fn fold_plural(t: &str) -> &str {
    if t.len() <= 3 || t.ends_with("ss") || t.ends_with("us") || t.ends_with("is") {
        return t;
    }
    for suffix in ["sses", "uses", "xes", "ches", "shes"] {
        if t.ends_with(suffix) {
            return &t[..t.len() - 2];
        }
    }
    t.strip_suffix('s').unwrap_or(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Relation,
    Class,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentDescription {
    pub id: String,
    pub kind: ComponentKind,
    pub text: String,
}

impl ComponentDescription {
    pub fn relation(id: &str, name: &str, domain: &str, range: &str) -> ComponentDescription {
        ComponentDescription {
            id: id.into(),
            kind: ComponentKind::Relation,
            text: format!("[D] {domain} [N] {name} [R] {range}"),
        }
    }

    pub fn class(id: &str, name: &str) -> ComponentDescription {
        ComponentDescription {
            id: id.into(),
            kind: ComponentKind::Class,
            text: format!("[D] {} [N] {name}", domain_group(id)),
        }
    }
}

/// Descriptions of every relation and class in the KB, in id order.
pub fn describe_kb(kb: &KnowledgeBase) -> Vec<ComponentDescription> {
    let mut out: Vec<ComponentDescription> = kb
        .relations()
        .map(|r| ComponentDescription::relation(&r.id, &r.name, &r.domain, &r.range))
        .collect();
    out.extend(kb.classes().map(|c| ComponentDescription::class(&c.id, &c.name)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Inverted index over one kind of description.
#[derive(Debug, Clone, Default)]
pub struct Bm25Index {
    ids: Vec<String>,
    lengths: Vec<usize>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    avg_len: f64,
}

impl Bm25Index {
    pub fn new<'a>(docs: impl IntoIterator<Item = (&'a str, Vec<String>)>) -> Bm25Index {
        let mut index = Bm25Index::default();
        for (id, tokens) in docs {
            let doc = index.ids.len();
            index.ids.push(id.to_string());
            index.lengths.push(tokens.len());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                index.postings.entry(t).or_default().push((doc, n));
            }
        }
        let total: usize = index.lengths.iter().sum();
        index.avg_len = if index.ids.is_empty() {
            0.0
        } else {
            total as f64 / index.ids.len() as f64
        };
        index
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Documents containing `term`, by id.
    pub fn posting_ids(&self, term: &str) -> Vec<&str> {
        self.postings
            .get(term)
            .map(|p| p.iter().map(|(d, _)| self.ids[*d].as_str()).collect())
            .unwrap_or_default()
    }

    pub fn idf(&self, term: &str) -> f64 {
        bm25_idf(self.ids.len(), self.doc_freq(term))
    }

    /// Scores every document with at least one query term; highest first,
    /// ties by id, truncated to `pool`.
    pub fn search(&self, query: &[String], params: Bm25Params, pool: usize) -> Vec<(String, f64)> {
        let terms: BTreeSet<&String> = query.iter().collect();
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for t in terms {
            let Some(posting) = self.postings.get(t.as_str()) else {
                continue;
            };
            let idf = self.idf(t);
            for &(doc, tf) in posting {
                let tf = f64::from(tf);
                let norm = 1.0 - params.b + params.b * self.lengths[doc] as f64 / self.avg_len;
                *scores.entry(doc).or_default() += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
            }
        }
        let mut out: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(d, s)| (self.ids[d].clone(), s))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.truncate(pool);
        out
    }
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`.
pub fn bm25_idf(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scorer `{scorer}` failed: {message}")]
pub struct ScorerError {
    pub scorer: String,
    pub message: String,
}

/// Deterministic, side-effect-free similarity between a question and a
/// component description (or any other text such as a skeleton).
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, question: &str, description: &str) -> Result<f64, ScorerError>;
}

/// Cosine similarity of TF-IDF vectors, with smooth IDF
/// `ln((1 + N) / (1 + df)) + 1` estimated over a description corpus.
#[derive(Debug, Clone, Default)]
pub struct TfIdfScorer {
    docs: usize,
    df: HashMap<String, usize>,
}

impl TfIdfScorer {
    pub fn fit<'a>(corpus: impl IntoIterator<Item = &'a str>) -> TfIdfScorer {
        let mut s = TfIdfScorer::default();
        for doc in corpus {
            s.docs += 1;
            let terms: BTreeSet<String> = tokenize(doc).into_iter().collect();
            for t in terms {
                *s.df.entry(t).or_default() += 1;
            }
        }
        s
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((1.0 + self.docs as f64) / (1.0 + df)).ln() + 1.0
    }

    fn vector(&self, text: &str) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokenize(text) {
            *tf.entry(t).or_default() += 1.0;
        }
        for (t, w) in tf.iter_mut() {
            *w *= self.idf(t);
        }
        tf
    }
}

impl Scorer for TfIdfScorer {
    fn name(&self) -> &str {
        "tfidf"
    }

    fn score(&self, question: &str, description: &str) -> Result<f64, ScorerError> {
        let q = self.vector(question);
        let d = self.vector(description);
        let dot: f64 = q.iter().filter_map(|(t, w)| d.get(t).map(|v| w * v)).sum();
        let nq: f64 = q.values().map(|w| w * w).sum::<f64>().sqrt();
        let nd: f64 = d.values().map(|w| w * w).sum::<f64>().sqrt();
        if nq == 0.0 || nd == 0.0 {
            return Ok(0.0);
        }
        Ok((dot / (nq * nd)).clamp(0.0, 1.0))
    }
}

/// Jaccard overlap of token sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlapScorer;

impl Scorer for OverlapScorer {
    fn name(&self) -> &str {
        "overlap"
    }

    fn score(&self, question: &str, description: &str) -> Result<f64, ScorerError> {
        let a: BTreeSet<String> = tokenize(question).into_iter().collect();
        let b: BTreeSet<String> = tokenize(description).into_iter().collect();
        let union = a.union(&b).count();
        if union == 0 {
            return Ok(0.0);
        }
        Ok(a.intersection(&b).count() as f64 / union as f64)
    }
}

pub const SCORER_NAMES: &[&str] = &["tfidf", "overlap"];

/// Looks up a bundled scorer by name; the TF-IDF scorer is fitted on the
/// KB's component descriptions.
pub fn scorer_by_name(name: &str, kb: &KnowledgeBase) -> Option<Box<dyn Scorer>> {
    match name {
        "tfidf" => {
            let docs = describe_kb(kb);
            Some(Box::new(TfIdfScorer::fit(docs.iter().map(|d| d.text.as_str()))))
        }
        "overlap" => Some(Box::new(OverlapScorer)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalConfig {
    pub top_k_relations: usize,
    pub top_k_classes: usize,
    pub bm25: Bm25Params,
    pub pool: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            top_k_relations: 10,
            top_k_classes: 10,
            bm25: Bm25Params::default(),
            pool: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("invalid retrieval config: {0}")]
    Config(String),
    #[error("scoring `{id}`: {source}")]
    Scorer {
        id: String,
        #[source]
        source: ScorerError,
    },
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        let positive = self.top_k_relations > 0
            && self.top_k_classes > 0
            && self.pool > 0
            && self.bm25.k1 > 0.0
            && self.bm25.b > 0.0;
        if !positive {
            return Err(RetrievalError::Config("all parameters must be positive".into()));
        }
        if self.top_k_relations > self.pool || self.top_k_classes > self.pool {
            return Err(RetrievalError::Config("top_k exceeds the recall pool".into()));
        }
        Ok(())
    }

    fn top_k(&self, kind: ComponentKind) -> usize {
        match kind {
            ComponentKind::Relation => self.top_k_relations,
            ComponentKind::Class => self.top_k_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCandidate {
    pub id: String,
    pub recall: f64,
    pub semantic: f64,
    /// 1-based.
    pub rank: usize,
}

/// Sorts by semantic score, then recall score (both descending), then id,
/// and assigns ranks.
pub fn rank_candidates(mut cands: Vec<ScoredCandidate>) -> Vec<ScoredCandidate> {
    cands.sort_by(|a, b| {
        b.semantic
            .total_cmp(&a.semantic)
            .then_with(|| b.recall.total_cmp(&a.recall))
            .then_with(|| a.id.cmp(&b.id))
    });
    for (i, c) in cands.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    cands
}

/// Per-kind BM25 indexes plus the descriptions they were built from.
#[derive(Debug, Clone, Default)]
pub struct ComponentIndex {
    relations: Bm25Index,
    classes: Bm25Index,
    descriptions: BTreeMap<(ComponentKind, String), ComponentDescription>,
}

impl ComponentIndex {
    pub fn build(kb: &KnowledgeBase) -> ComponentIndex {
        ComponentIndex::from_descriptions(describe_kb(kb))
    }

    pub fn from_descriptions(descs: Vec<ComponentDescription>) -> ComponentIndex {
        let of_kind = |kind| {
            Bm25Index::new(
                descs
                    .iter()
                    .filter(|d| d.kind == kind)
                    .map(|d| (d.id.as_str(), tokenize(&d.text))),
            )
        };
        ComponentIndex {
            relations: of_kind(ComponentKind::Relation),
            classes: of_kind(ComponentKind::Class),
            descriptions: descs
                .iter()
                .map(|d| ((d.kind, d.id.clone()), d.clone()))
                .collect(),
        }
    }

    pub fn bm25(&self, kind: ComponentKind) -> &Bm25Index {
        match kind {
            ComponentKind::Relation => &self.relations,
            ComponentKind::Class => &self.classes,
        }
    }

    pub fn description(&self, kind: ComponentKind, id: &str) -> Option<&ComponentDescription> {
        self.descriptions.get(&(kind, id.to_string()))
    }

    pub fn descriptions(&self) -> impl Iterator<Item = &ComponentDescription> {
        self.descriptions.values()
    }

    pub fn bm25_recall(
        &self,
        question: &str,
        kind: ComponentKind,
        params: Bm25Params,
        pool: usize,
    ) -> Vec<(String, f64)> {
        self.bm25(kind).search(&tokenize(question), params, pool)
    }

    pub fn score_semantic(
        &self,
        question: &str,
        desc: &ComponentDescription,
        scorer: &dyn Scorer,
    ) -> Result<f64, RetrievalError> {
        scorer
            .score(question, &desc.text)
            .map_err(|source| RetrievalError::Scorer {
                id: desc.id.clone(),
                source,
            })
    }

    /// BM25 recall of `pool`, semantic rerank, truncation to top-k.
    pub fn top_k_components(
        &self,
        question: &str,
        kind: ComponentKind,
        config: &RetrievalConfig,
        scorer: &dyn Scorer,
    ) -> Result<Vec<ScoredCandidate>, RetrievalError> {
        config.validate()?;
        let recalled = self.bm25_recall(question, kind, config.bm25, config.pool);
        let mut cands = Vec::with_capacity(recalled.len());
        for (id, recall) in recalled {
            let desc = self
                .description(kind, &id)
                .expect("indexed ids have descriptions");
            cands.push(ScoredCandidate {
                semantic: self.score_semantic(question, desc, scorer)?,
                id,
                recall,
                rank: 0,
            });
        }
        let mut ranked = rank_candidates(cands);
        ranked.truncate(config.top_k(kind));
        Ok(ranked)
    }
}

/// `-ln(e^pos / (e^pos + sum e^neg))`, stabilized with log-sum-exp.
pub fn contrastive_loss(pos: f64, negs: &[f64]) -> f64 {
    let max = negs.iter().copied().fold(pos, f64::max);
    let sum: f64 = std::iter::once(pos)
        .chain(negs.iter().copied())
        .map(|s| (s - max).exp())
        .sum();
    (max + sum.ln() - pos).max(0.0)
}

/// Softmax-normalized scores of one candidate pool.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NormalizedPool {
    probs: BTreeMap<String, f64>,
}

impl NormalizedPool {
    pub fn new<I, S>(raw: I) -> NormalizedPool
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        NormalizedPool::with_temperature(raw, 1.0)
    }

    /// Softmax of `score / temperature`.
    pub fn with_temperature<I, S>(raw: I, temperature: f64) -> NormalizedPool
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let raw: Vec<(String, f64)> = raw
            .into_iter()
            .map(|(id, s)| (id.into(), s / temperature))
            .collect();
        let max = raw.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = raw.iter().map(|(_, s)| (s - max).exp()).sum();
        NormalizedPool {
            probs: raw
                .into_iter()
                .map(|(id, s)| {
                    let p = (s - max).exp() / total;
                    (id, p)
                })
                .collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.probs.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Softmax temperature for pooled component scores. Lexical similarities
/// live in `[0, 1]`; at temperature 1 every pool would be nearly uniform.
pub const SOFTMAX_TEMPERATURE: f64 = 0.1;

/// Candidate pools for fine-grained expression scoring. Each entry is a
/// component id (or skeleton text) and the text handed to the scorer.
#[derive(Debug, Clone)]
pub struct FinePools {
    pub relations: Vec<(String, String)>,
    pub classes: Vec<(String, String)>,
    /// Optional; when non-empty the expression's skeleton is scored too.
    pub skeletons: Vec<(String, String)>,
    pub temperature: f64,
}

impl Default for FinePools {
    fn default() -> Self {
        FinePools {
            relations: Vec::new(),
            classes: Vec::new(),
            skeletons: Vec::new(),
            temperature: SOFTMAX_TEMPERATURE,
        }
    }
}

fn normalize_pool(
    question: &str,
    pool: &[(String, String)],
    scorer: &dyn Scorer,
    temperature: f64,
) -> Result<NormalizedPool, RetrievalError> {
    let mut raw = Vec::with_capacity(pool.len());
    for (id, text) in pool {
        let s = scorer
            .score(question, text)
            .map_err(|source| RetrievalError::Scorer {
                id: id.clone(),
                source,
            })?;
        raw.push((id.clone(), s));
    }
    Ok(NormalizedPool::with_temperature(raw, temperature))
}

/// Sum of the per-pool softmax scores (at `pools.temperature`) of every relation and class in
/// `expr` (and of its skeleton when a skeleton pool is given). A component
/// missing from its pool contributes 0.
pub fn score_expression_fine(
    question: &str,
    expr: &SExpr,
    scorer: &dyn Scorer,
    pools: &FinePools,
) -> Result<f64, RetrievalError> {
    let rel = normalize_pool(question, &pools.relations, scorer, pools.temperature)?;
    let cls = normalize_pool(question, &pools.classes, scorer, pools.temperature)?;
    let mut total = 0.0;
    let mut add = |pool: &NormalizedPool, id: &str| match pool.get(id) {
        Some(p) => total += p,
        None => log::warn!("component `{id}` is not in its candidate pool"),
    };
    for leaf in expr.leaves() {
        match leaf {
            Leaf::Relation(r) => add(&rel, r),
            Leaf::Class(c) => add(&cls, c),
            _ => {}
        }
    }
    if !pools.skeletons.is_empty() {
        let sk = normalize_pool(question, &pools.skeletons, scorer, pools.temperature)?;
        add(&sk, &crate::logical_form::skeletonize(expr).to_string());
    }
    Ok(total)
}
