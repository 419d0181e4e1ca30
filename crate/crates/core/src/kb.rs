//! In-memory knowledge base: ontology, relational facts and their indexes.
//!
//! The TSV format has five sections, each introduced by a header line:
//!
//! ```text
//! #classes    id<TAB>name
//! #relations  id<TAB>name<TAB>domain_class<TAB>range_class<TAB>reverse_id_or_-
//! #entities   id<TAB>popularity<TAB>name1|name2|...
//! #ontology   domain<TAB>relation<TAB>range
//! #facts      subject<TAB>relation<TAB>object
//! ```
//!
//! Class membership is written as a fact with the reserved relation
//! [`TYPE_RELATION`] and a class as object. Objects containing `^^` are
//! typed literals. Lines starting with `# ` (hash, space) are comments.
//!
//! A declared reverse pair shares one edge set: every entity-valued fact
//! `(s, r, o)` is also visible as `(o, reverse(r), s)`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::logical_form::Literal;

/// Reserved relation for class membership facts.
pub const TYPE_RELATION: &str = "type.object.type";

static EMPTY: BTreeSet<String> = BTreeSet::new();

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate {kind} id `{id}`")]
    Duplicate {
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("line {line}: reference to unknown {kind} `{id}`")]
    Dangling {
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("line {line}: {message}")]
    Inconsistent { line: usize, message: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassInfo {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationInfo {
    pub id: String,
    pub name: String,
    pub domain: String,
    pub range: String,
    pub reverse: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityInfo {
    pub id: String,
    pub popularity: u64,
    pub names: Vec<String>,
}

/// Topic-domain grouping of a dotted identifier: its first segment.
pub fn domain_group(id: &str) -> &str {
    id.split('.').next().unwrap_or(id)
}

/// Classes under `type.` (other than membership itself) hold literal values.
pub fn is_literal_class(class: &str) -> bool {
    class.starts_with("type.") && class != TYPE_RELATION
}

/// A node that can stand in object position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Value {
    Entity(String),
    /// Stored in canonical form so equal values compare equal.
    Literal(Literal),
}

impl Value {
    pub fn literal(lit: &Literal) -> Value {
        Value::Literal(lit.canonical())
    }

    pub fn as_entity(&self) -> Option<&str> {
        match self {
            Value::Entity(e) => Some(e),
            Value::Literal(_) => None,
        }
    }

    /// Answer-string form: entity id, or the literal's value text.
    pub fn answer_text(&self) -> String {
        match self {
            Value::Entity(e) => e.clone(),
            Value::Literal(l) => l.value_text().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fact {
    pub subject: String,
    pub relation: String,
    pub object: Value,
}

/// Entity-valued and literal-valued edges of one relation, both directions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationEdges {
    pub forward: BTreeMap<String, BTreeSet<Value>>,
    pub backward: BTreeMap<Value, BTreeSet<String>>,
}

impl RelationEdges {
    fn insert(&mut self, s: &str, o: Value) {
        self.forward.entry(s.to_string()).or_default().insert(o.clone());
        self.backward.entry(o).or_default().insert(s.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn len(&self) -> usize {
        self.forward.values().map(BTreeSet::len).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Reject dangling references and domain/range violations. When off,
    /// offending facts are dropped (dangling) or kept (typing) with a
    /// warning.
    pub strict: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { strict: true }
    }
}

/// Programmatic construction; the TSV loader goes through the same path.
/// Every item carries the source line it came from (0 when built in code).
#[derive(Debug, Default, Clone)]
pub struct KbBuilder {
    classes: Vec<(usize, ClassInfo)>,
    relations: Vec<(usize, RelationInfo)>,
    entities: Vec<(usize, EntityInfo)>,
    ontology: Vec<(usize, [String; 3])>,
    facts: Vec<(usize, [String; 3])>,
}

impl KbBuilder {
    pub fn new() -> KbBuilder {
        KbBuilder::default()
    }

    pub fn class(&mut self, id: &str, name: &str) -> &mut Self {
        self.class_at(0, id, name)
    }

    fn class_at(&mut self, line: usize, id: &str, name: &str) -> &mut Self {
        self.classes.push((
            line,
            ClassInfo {
                id: id.into(),
                name: name.into(),
            },
        ));
        self
    }

    pub fn relation(
        &mut self,
        id: &str,
        name: &str,
        domain: &str,
        range: &str,
        reverse: Option<&str>,
    ) -> &mut Self {
        self.relations.push((
            0,
            RelationInfo {
                id: id.into(),
                name: name.into(),
                domain: domain.into(),
                range: range.into(),
                reverse: reverse.map(Into::into),
            },
        ));
        self
    }

    pub fn entity(&mut self, id: &str, popularity: u64, names: &[&str]) -> &mut Self {
        self.entities.push((
            0,
            EntityInfo {
                id: id.into(),
                popularity,
                names: names.iter().map(|s| s.to_string()).collect(),
            },
        ));
        self
    }

    pub fn ontology(&mut self, domain: &str, relation: &str, range: &str) -> &mut Self {
        self.ontology
            .push((0, [domain.into(), relation.into(), range.into()]));
        self
    }

    /// Adds a fact; the object is interpreted as in the TSV format.
    pub fn fact(&mut self, subject: &str, relation: &str, object: &str) -> &mut Self {
        self.facts
            .push((0, [subject.into(), relation.into(), object.into()]));
        self
    }

    pub fn member(&mut self, entity: &str, class: &str) -> &mut Self {
        self.fact(entity, TYPE_RELATION, class)
    }

    pub fn build(&self, opts: LoadOptions) -> Result<KnowledgeBase, KbError> {
        KnowledgeBase::assemble(self, opts)
    }
}

/// Immutable, fully indexed knowledge base.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    classes: BTreeMap<String, ClassInfo>,
    relations: BTreeMap<String, RelationInfo>,
    entities: BTreeMap<String, EntityInfo>,
    facts: Vec<Fact>,
    memberships: Vec<(String, String)>,
    ontology: BTreeSet<(String, String, String)>,
    by_domain: BTreeMap<String, BTreeSet<String>>,
    by_range: BTreeMap<String, BTreeSet<String>>,
    edges: BTreeMap<String, RelationEdges>,
    incident: BTreeMap<String, BTreeSet<String>>,
    members: BTreeMap<String, BTreeSet<String>>,
    types: BTreeMap<String, BTreeSet<String>>,
}

fn split_fields(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>, KbError> {
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() != n || fields.iter().any(|f| f.is_empty()) {
        return Err(KbError::Malformed {
            line: lineno,
            message: format!("expected {n} non-empty tab-separated fields, found {}", fields.len()),
        });
    }
    Ok(fields)
}

impl KnowledgeBase {
    pub fn load(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
        KnowledgeBase::load_with(path, LoadOptions::default())
    }

    pub fn load_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<KnowledgeBase, KbError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        KnowledgeBase::from_tsv(&text, opts)
    }

    pub fn from_tsv(text: &str, opts: LoadOptions) -> Result<KnowledgeBase, KbError> {
        let mut b = KbBuilder::new();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with("# ") || trimmed == "#" {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('#') {
                let header = header.trim();
                match header {
                    "classes" | "relations" | "entities" | "ontology" | "facts" => {
                        section = Some(match header {
                            "classes" => "classes",
                            "relations" => "relations",
                            "entities" => "entities",
                            "ontology" => "ontology",
                            _ => "facts",
                        })
                    }
                    other => {
                        return Err(KbError::Malformed {
                            line,
                            message: format!("unknown section `#{other}`"),
                        })
                    }
                }
                continue;
            }
            match section {
                None => {
                    return Err(KbError::Malformed {
                        line,
                        message: "data before any section header".into(),
                    })
                }
                Some("classes") => {
                    let f = split_fields(trimmed, 2, line)?;
                    b.class_at(line, f[0], f[1]);
                }
                Some("relations") => {
                    let f = split_fields(trimmed, 5, line)?;
                    b.relations.push((
                        line,
                        RelationInfo {
                            id: f[0].into(),
                            name: f[1].into(),
                            domain: f[2].into(),
                            range: f[3].into(),
                            reverse: (f[4] != "-").then(|| f[4].to_string()),
                        },
                    ));
                }
                Some("entities") => {
                    let f = split_fields(trimmed, 3, line)?;
                    let popularity = f[1].parse::<u64>().map_err(|_| KbError::Malformed {
                        line,
                        message: format!("popularity `{}` is not a non-negative integer", f[1]),
                    })?;
                    let names: Vec<String> = f[2]
                        .split('|')
                        .map(str::trim)
                        .filter(|n| !n.is_empty())
                        .map(String::from)
                        .collect();
                    if names.is_empty() {
                        return Err(KbError::Malformed {
                            line,
                            message: "entity needs at least one surface name".into(),
                        });
                    }
                    b.entities.push((
                        line,
                        EntityInfo {
                            id: f[0].into(),
                            popularity,
                            names,
                        },
                    ));
                }
                Some("ontology") => {
                    let f = split_fields(trimmed, 3, line)?;
                    b.ontology.push((line, [f[0].into(), f[1].into(), f[2].into()]));
                }
                Some(_) => {
                    let f = split_fields(trimmed, 3, line)?;
                    b.facts.push((line, [f[0].into(), f[1].into(), f[2].into()]));
                }
            }
        }
        b.build(opts)
    }

    fn assemble(b: &KbBuilder, opts: LoadOptions) -> Result<KnowledgeBase, KbError> {
        let mut kb = KnowledgeBase::default();
        for (line, c) in &b.classes {
            if kb.classes.insert(c.id.clone(), c.clone()).is_some() {
                return Err(KbError::Duplicate {
                    line: *line,
                    kind: "class",
                    id: c.id.clone(),
                });
            }
        }
        for (line, r) in &b.relations {
            if r.id == TYPE_RELATION {
                return Err(KbError::Malformed {
                    line: *line,
                    message: format!("`{TYPE_RELATION}` is reserved for class membership"),
                });
            }
            for class in [&r.domain, &r.range] {
                if !kb.classes.contains_key(class) {
                    return Err(KbError::Dangling {
                        line: *line,
                        kind: "class",
                        id: class.clone(),
                    });
                }
            }
            if kb.relations.insert(r.id.clone(), r.clone()).is_some() {
                return Err(KbError::Duplicate {
                    line: *line,
                    kind: "relation",
                    id: r.id.clone(),
                });
            }
        }
        // Reverse declarations: close symmetrically, check typing.
        let declared: Vec<(usize, String, String)> = b
            .relations
            .iter()
            .filter_map(|(l, r)| r.reverse.clone().map(|rev| (*l, r.id.clone(), rev)))
            .collect();
        for (line, id, rev) in declared {
            let Some(other) = kb.relations.get(&rev).cloned() else {
                return Err(KbError::Dangling {
                    line,
                    kind: "relation",
                    id: rev,
                });
            };
            let this = kb.relations[&id].clone();
            if other.reverse.as_deref().is_some_and(|r| r != id) {
                return Err(KbError::Inconsistent {
                    line,
                    message: format!("`{rev}` already declares a different reverse"),
                });
            }
            if other.domain != this.range || other.range != this.domain {
                return Err(KbError::Inconsistent {
                    line,
                    message: format!("`{rev}` is not typed as the inverse of `{id}`"),
                });
            }
            kb.relations.get_mut(&rev).unwrap().reverse = Some(id.clone());
        }
        for r in kb.relations.values() {
            kb.ontology
                .insert((r.domain.clone(), r.id.clone(), r.range.clone()));
            kb.by_domain
                .entry(r.domain.clone())
                .or_default()
                .insert(r.id.clone());
            kb.by_range
                .entry(r.range.clone())
                .or_default()
                .insert(r.id.clone());
        }
        for (line, [d, r, c]) in &b.ontology {
            let Some(rel) = kb.relations.get(r) else {
                return Err(KbError::Dangling {
                    line: *line,
                    kind: "relation",
                    id: r.clone(),
                });
            };
            for class in [d, c] {
                if !kb.classes.contains_key(class) {
                    return Err(KbError::Dangling {
                        line: *line,
                        kind: "class",
                        id: class.clone(),
                    });
                }
            }
            if &rel.domain != d || &rel.range != c {
                return Err(KbError::Inconsistent {
                    line: *line,
                    message: format!(
                        "ontology triple ({d}, {r}, {c}) disagrees with declared ({}, {r}, {})",
                        rel.domain, rel.range
                    ),
                });
            }
        }
        for (line, e) in &b.entities {
            if e.names.is_empty() || e.names.iter().any(|n| n.trim().is_empty()) {
                return Err(KbError::Malformed {
                    line: *line,
                    message: format!("entity `{}` needs non-empty surface names", e.id),
                });
            }
            if kb.entities.insert(e.id.clone(), e.clone()).is_some() {
                return Err(KbError::Duplicate {
                    line: *line,
                    kind: "entity",
                    id: e.id.clone(),
                });
            }
        }

        let dangling = |line: usize, kind: &'static str, id: &str| -> Result<(), KbError> {
            let err = KbError::Dangling {
                line,
                kind,
                id: id.to_string(),
            };
            if opts.strict {
                Err(err)
            } else {
                log::warn!("dropping fact: {err}");
                Ok(())
            }
        };

        let mut typed_facts: Vec<(usize, Fact)> = Vec::new();
        for (line, [s, r, o]) in &b.facts {
            if !kb.entities.contains_key(s) {
                dangling(*line, "entity", s)?;
                continue;
            }
            if r == TYPE_RELATION {
                if !kb.classes.contains_key(o) {
                    dangling(*line, "class", o)?;
                    continue;
                }
                kb.memberships.push((s.clone(), o.clone()));
                kb.members.entry(o.clone()).or_default().insert(s.clone());
                kb.types.entry(s.clone()).or_default().insert(o.clone());
                continue;
            }
            if !kb.relations.contains_key(r) {
                dangling(*line, "relation", r)?;
                continue;
            }
            let object = if kb.entities.contains_key(o) {
                Value::Entity(o.clone())
            } else if let Some(lit) = Literal::parse(o) {
                Value::literal(&lit)
            } else {
                dangling(*line, "entity", o)?;
                continue;
            };
            typed_facts.push((
                *line,
                Fact {
                    subject: s.clone(),
                    relation: r.clone(),
                    object,
                },
            ));
        }

        for (line, f) in &typed_facts {
            let rel = &kb.relations[&f.relation];
            let subject_ok = kb.members.get(&rel.domain).is_some_and(|m| m.contains(&f.subject));
            let object_ok = match &f.object {
                Value::Entity(o) => kb.members.get(&rel.range).is_some_and(|m| m.contains(o)),
                Value::Literal(_) => is_literal_class(&rel.range),
            };
            if !(subject_ok && object_ok) {
                let err = KbError::Inconsistent {
                    line: *line,
                    message: format!(
                        "fact ({}, {}, {:?}) violates ({}, {}, {})",
                        f.subject, f.relation, f.object, rel.domain, f.relation, rel.range
                    ),
                };
                if opts.strict {
                    return Err(err);
                }
                log::warn!("{err}");
            }
        }

        for (_, f) in typed_facts {
            kb.edges
                .entry(f.relation.clone())
                .or_default()
                .insert(&f.subject, f.object.clone());
            if let (Value::Entity(o), Some(rev)) = (&f.object, &kb.relations[&f.relation].reverse) {
                kb.edges
                    .entry(rev.clone())
                    .or_default()
                    .insert(o, Value::Entity(f.subject.clone()));
            }
            kb.facts.push(f);
        }
        for (r, edges) in &kb.edges {
            for (s, objs) in &edges.forward {
                kb.incident.entry(s.clone()).or_default().insert(r.clone());
                for o in objs {
                    if let Value::Entity(o) = o {
                        let entry = kb.incident.entry(o.clone()).or_default();
                        entry.insert(r.clone());
                        if let Some(rev) = &kb.relations[r].reverse {
                            entry.insert(rev.clone());
                        }
                    }
                }
            }
        }
        Ok(kb)
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassInfo> {
        self.classes.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationInfo> {
        self.relations.values()
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityInfo> {
        self.entities.values()
    }

    /// Facts as loaded (membership facts excluded, reverse edges not
    /// materialized).
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn memberships(&self) -> &[(String, String)] {
        &self.memberships
    }

    pub fn ontology(&self) -> &BTreeSet<(String, String, String)> {
        &self.ontology
    }

    pub fn class(&self, id: &str) -> Option<&ClassInfo> {
        self.classes.get(id)
    }

    pub fn relation(&self, id: &str) -> Option<&RelationInfo> {
        self.relations.get(id)
    }

    pub fn entity(&self, id: &str) -> Option<&EntityInfo> {
        self.entities.get(id)
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.relations.is_empty() && self.entities.is_empty()
    }

    fn require_class(&self, c: &str) -> Result<(), KbError> {
        if self.classes.contains_key(c) {
            Ok(())
        } else {
            Err(KbError::UnknownClass(c.to_string()))
        }
    }

    pub(crate) fn require_relation(&self, r: &str) -> Result<&RelationInfo, KbError> {
        self.relations
            .get(r)
            .ok_or_else(|| KbError::UnknownRelation(r.to_string()))
    }

    pub fn relations_with_domain(&self, c: &str) -> Result<&BTreeSet<String>, KbError> {
        self.require_class(c)?;
        Ok(self.by_domain.get(c).unwrap_or(&EMPTY))
    }

    pub fn relations_with_range(&self, c: &str) -> Result<&BTreeSet<String>, KbError> {
        self.require_class(c)?;
        Ok(self.by_range.get(c).unwrap_or(&EMPTY))
    }

    /// Relations with a fact touching `e` on either side, plus the declared
    /// reverse of every relation where `e` is the object.
    pub fn incident_relations(&self, e: &str) -> Result<&BTreeSet<String>, KbError> {
        if !self.entities.contains_key(e) {
            return Err(KbError::UnknownEntity(e.to_string()));
        }
        Ok(self.incident.get(e).unwrap_or(&EMPTY))
    }

    pub fn reverse(&self, r: &str) -> Result<Option<&str>, KbError> {
        Ok(self.require_relation(r)?.reverse.as_deref())
    }

    pub fn members(&self, c: &str) -> Result<&BTreeSet<String>, KbError> {
        self.require_class(c)?;
        Ok(self.members.get(c).unwrap_or(&EMPTY))
    }

    /// Classes an entity belongs to (empty for unknown entities).
    pub fn types_of(&self, e: &str) -> &BTreeSet<String> {
        self.types.get(e).unwrap_or(&EMPTY)
    }

    /// Edges of a relation, including edges inherited from its reverse.
    pub fn edges(&self, r: &str) -> Option<&RelationEdges> {
        self.edges.get(r)
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KnowledgeBase {
        crate::toy::toy_kb()
    }

    #[test]
    fn toy_kb_loads_railway_classes() {
        let kb = toy();
        assert!(kb.class("railway.railway").is_some());
        assert!(kb
            .relations_with_domain("railway.railway")
            .unwrap()
            .contains("rail.railway.terminuses"));
    }

    #[test]
    fn empty_kb_has_empty_lookups() {
        let kb = KnowledgeBase::from_tsv("#classes\n#relations\n#ontology\n#facts\n", LoadOptions::default())
            .unwrap();
        assert!(kb.is_empty());
        assert_eq!(kb.facts().len(), 0);
        assert!(kb.edges("anything").is_none());
    }

    #[test]
    fn dangling_relation_is_rejected() {
        let text = "#classes\nc.a\tA\n#entities\nm.x\t0\tx\n#facts\nm.x\tr.missing\tm.x\n";
        match KnowledgeBase::from_tsv(text, LoadOptions::default()) {
            Err(KbError::Dangling { line, kind, id }) => {
                assert_eq!((line, kind, id.as_str()), (6, "relation", "r.missing"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let lenient = KnowledgeBase::from_tsv(text, LoadOptions { strict: false }).unwrap();
        assert!(lenient.facts().is_empty());
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let dup = "#classes\nc.a\tA\n#relations\nr.x\tx\tc.a\tc.a\t-\nr.x\tx\tc.a\tc.a\t-\n";
        assert!(matches!(
            KnowledgeBase::from_tsv(dup, LoadOptions::default()),
            Err(KbError::Duplicate { line: 5, kind: "relation", .. })
        ));
        let bad = "#entities\nm.x\tmany\tx\n";
        assert!(matches!(
            KnowledgeBase::from_tsv(bad, LoadOptions::default()),
            Err(KbError::Malformed { line: 2, .. })
        ));
        let short = "#classes\nc.a\n";
        assert!(matches!(
            KnowledgeBase::from_tsv(short, LoadOptions::default()),
            Err(KbError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn strict_mode_checks_domain_and_range() {
        let text = "#classes\nc.a\tA\nc.b\tB\n#relations\nr.x\tx\tc.a\tc.b\t-\n\
                    #entities\nm.1\t0\tone\nm.2\t0\ttwo\n#facts\n\
                    m.1\ttype.object.type\tc.a\nm.2\ttype.object.type\tc.a\nm.1\tr.x\tm.2\n";
        assert!(matches!(
            KnowledgeBase::from_tsv(text, LoadOptions::default()),
            Err(KbError::Inconsistent { line: 12, .. })
        ));
        assert!(KnowledgeBase::from_tsv(text, LoadOptions { strict: false }).is_ok());
    }

    #[test]
    fn reverse_lookup_and_involution() {
        let kb = toy();
        let rev = kb.reverse("rail.railway.terminuses").unwrap().unwrap();
        assert_eq!(rev, "rail.railway_terminus.railways");
        assert_eq!(kb.reverse(rev).unwrap(), Some("rail.railway.terminuses"));
        for r in kb.relations() {
            if let Some(rev) = kb.reverse(&r.id).unwrap() {
                assert_eq!(kb.reverse(rev).unwrap(), Some(r.id.as_str()));
            }
        }
        assert_eq!(kb.reverse("rail.railway.length").unwrap(), None);
        assert!(matches!(kb.reverse("nope"), Err(KbError::UnknownRelation(_))));
    }

    #[test]
    fn incident_relations_of_terminus() {
        let kb = toy();
        let inc = kb.incident_relations("m.antonio_station").unwrap();
        // linear scan over the raw facts
        let mut expected = BTreeSet::new();
        for f in kb.facts() {
            if f.subject == "m.antonio_station" {
                expected.insert(f.relation.clone());
            }
            if f.object == Value::Entity("m.antonio_station".into()) {
                expected.insert(f.relation.clone());
                if let Some(rev) = kb.reverse(&f.relation).unwrap() {
                    expected.insert(rev.to_string());
                }
            }
            if let Some(rev) = kb.reverse(&f.relation).unwrap() {
                if f.subject == "m.antonio_station" {
                    expected.insert(rev.to_string());
                }
            }
        }
        assert_eq!(inc, &expected);
        assert!(inc.contains("rail.railway.terminuses"));
        assert!(kb.incident_relations("m.lonely_isle").unwrap().is_empty());
        assert!(kb.incident_relations("m.nobody").is_err());
    }

    #[test]
    fn unknown_ids_are_errors() {
        let kb = toy();
        assert!(matches!(kb.relations_with_domain("x.y"), Err(KbError::UnknownClass(_))));
        assert!(kb.relations_with_domain("rail.railway_type").unwrap().is_empty());
    }

    #[test]
    fn load_from_file_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.tsv");
        std::fs::write(&path, crate::toy::TOY_KB_TSV).unwrap();
        let a = KnowledgeBase::load(&path).unwrap();
        let b = KnowledgeBase::load(&path).unwrap();
        assert_eq!(a.facts(), b.facts());
        assert_eq!(a.ontology(), b.ontology());
        assert_eq!(a.incident, b.incident);
        assert_eq!(a.edges, b.edges);
        assert!(matches!(
            KnowledgeBase::load(dir.path().join("missing.tsv")),
            Err(KbError::Io { .. })
        ));
    }
}
