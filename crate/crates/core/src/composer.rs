//! Coarse-grained composition: turn skeletons plus connectivity pairs into
//! an executable s-expression by constrained beam search.
//!
//! Slots are filled in a fixed order (class before the constraints on it,
//! relations of a chain outward). Each slot's structural predecessor picks
//! the admissible components: a relation after class `c` must be paired
//! with `c`, a relation after relation `d` must chain from `d`, an entity
//! after `d` must be an object of `d`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::exec::{check_executable, ExecOptions, Rejection};
use crate::kb::KnowledgeBase;
use crate::logical_form::{Literal, Operator, Placeholder, SExpr, Skeleton};
use crate::midgrain::{skeletons_need_entities, ClassRelPair, DirRel, PairSets, RelRelPair};
use crate::retrieval::{NormalizedPool, ScoredCandidate, SOFTMAX_TEMPERATURE};
use crate::skeleton::SkeletonCandidate;

/// Per-question fine-grained candidates.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ComponentCandidates {
    /// `R_q`, with retrieval scores.
    pub relations: Vec<ScoredCandidate>,
    /// `C_q`.
    pub classes: Vec<ScoredCandidate>,
    /// `E_q`, one linked entity per mention, in mention order.
    pub entities: Vec<String>,
    /// Literal values found in the question.
    pub literals: Vec<Literal>,
    /// `L_q`, in proposer order.
    pub skeletons: Vec<SkeletonCandidate>,
}

impl ComponentCandidates {
    pub fn relation_ids(&self) -> Vec<String> {
        self.relations.iter().map(|c| c.id.clone()).collect()
    }

    pub fn class_ids(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.id.clone()).collect()
    }

    pub fn skeleton_list(&self) -> Vec<Skeleton> {
        self.skeletons.iter().map(|c| c.skeleton.clone()).collect()
    }
}

/// A component filling one slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Component {
    Class(String),
    Relation(DirRel),
    Entity(String),
    Literal(#[serde(serialize_with = "crate::composer::display_literal")] Literal),
}

fn display_literal<S: serde::Serializer>(l: &Literal, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(l)
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Class(c) | Component::Entity(c) => f.write_str(c),
            Component::Relation(d) => d.fmt(f),
            Component::Literal(l) => l.fmt(f),
        }
    }
}

impl Component {
    fn to_expr(&self) -> SExpr {
        match self {
            Component::Class(c) => SExpr::class(c.clone()),
            Component::Relation(d) => d.to_expr(),
            Component::Entity(e) => SExpr::entity(e.clone()),
            Component::Literal(l) => SExpr::literal(l.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Element {
    ClassRelation(ClassRelPair),
    RelationRelation(RelRelPair),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::ClassRelation(p) => write!(f, "[CL]{}[REL]{}", p.class, p.relation),
            Element::RelationRelation(p) => write!(f, "[REL]{} [REL]{}", p.first, p.second),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredElement {
    pub element: Element,
    pub score: f64,
}

fn lookup(scores: &BTreeMap<String, f64>, id: &str) -> f64 {
    match scores.get(id) {
        Some(s) => *s,
        None => {
            log::warn!("no semantic score for `{id}`; using 0");
            0.0
        }
    }
}

/// Class–relation and relation–relation pairs ranked by the sum of their
/// components' semantic scores, ties by serialized text.
pub fn order_candidates(pairs: &PairSets, scores: &BTreeMap<String, f64>) -> Vec<ScoredElement> {
    let mut out: Vec<ScoredElement> = pairs
        .class_relation
        .iter()
        .map(|p| ScoredElement {
            score: lookup(scores, &p.class) + lookup(scores, &p.relation.relation),
            element: Element::ClassRelation(p.clone()),
        })
        .chain(pairs.relation_relation.iter().map(|p| ScoredElement {
            score: lookup(scores, &p.first.relation) + lookup(scores, &p.second.relation),
            element: Element::RelationRelation(p.clone()),
        }))
        .collect();
    out.sort_by_cached_key(|e| (std::cmp::Reverse(OrdF64(e.score)), e.element.to_string()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// `question;elem;…;[ENT]e;…;[LF]l;…`
pub fn serialize_input(
    question: &str,
    elements: &[ScoredElement],
    entities: &[String],
    skeletons: &[Skeleton],
) -> String {
    let mut parts = vec![question.to_string()];
    parts.extend(elements.iter().map(|e| e.element.to_string()));
    parts.extend(entities.iter().map(|e| format!("[ENT]{e}")));
    parts.extend(skeletons.iter().map(|s| format!("[LF]{s}")));
    parts.join(";")
}

/// Segments of a serialized input, as text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedInput {
    pub question: String,
    /// `(class, relation)` for `[CL]` segments, `(relation, relation)` for
    /// `[REL]` pairs.
    pub class_relations: Vec<(String, String)>,
    pub relation_relations: Vec<(String, String)>,
    /// Element kinds in order: `true` for class–relation.
    pub element_order: Vec<bool>,
    pub entities: Vec<String>,
    pub skeletons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed input segment `{0}`")]
pub struct InputParseError(pub String);

/// Inverse of [`serialize_input`] (assuming the question has no segment
/// that starts with a marker).
pub fn parse_input(text: &str) -> Result<ParsedInput, InputParseError> {
    const MARKERS: [&str; 4] = ["[CL]", "[REL]", "[ENT]", "[LF]"];
    let segs: Vec<&str> = text.split(';').collect();
    let first = segs
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, s)| MARKERS.iter().any(|m| s.starts_with(m)))
        .map_or(segs.len(), |(i, _)| i);
    let mut out = ParsedInput {
        question: segs[..first].join(";"),
        ..ParsedInput::default()
    };
    for seg in &segs[first..] {
        let bad = || InputParseError(seg.to_string());
        if let Some(rest) = seg.strip_prefix("[CL]") {
            let (c, r) = rest.split_once("[REL]").ok_or_else(bad)?;
            out.class_relations.push((c.to_string(), r.to_string()));
            out.element_order.push(true);
        } else if let Some(rest) = seg.strip_prefix("[REL]") {
            let (a, b) = rest.split_once(" [REL]").ok_or_else(bad)?;
            out.relation_relations.push((a.to_string(), b.to_string()));
            out.element_order.push(false);
        } else if let Some(e) = seg.strip_prefix("[ENT]") {
            out.entities.push(e.to_string());
        } else if let Some(l) = seg.strip_prefix("[LF]") {
            out.skeletons.push(l.to_string());
        } else {
            return Err(bad());
        }
    }
    Ok(out)
}

/// Operator tags, parentheses and placeholders.
pub fn structural_keywords() -> BTreeSet<String> {
    let mut k: BTreeSet<String> = Operator::ALL.iter().map(|o| o.tag().to_string()).collect();
    k.extend(["(", ")"].map(String::from));
    for p in [Placeholder::Rel, Placeholder::Class, Placeholder::Entity, Placeholder::Literal] {
        k.insert(format!("<{}>", p.name()));
    }
    k
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ComposeError {
    #[error("component `{0}` is not admissible at this step")]
    Inadmissible(String),
}

/// Admissible components at one decoding step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicVocabulary<'p> {
    pairs: &'p PairSets,
    pub entities: BTreeSet<String>,
    pub classes: BTreeSet<String>,
    pub relations: BTreeSet<DirRel>,
    pub keywords: BTreeSet<String>,
}

/// Entities of `E_q` (when some skeleton takes one), classes of `P_cr`,
/// and every traversal in any pair.
pub fn init_vocabulary<'p>(pairs: &'p PairSets, e_q: &[String], l_q: &[Skeleton]) -> DynamicVocabulary<'p> {
    if pairs.is_empty() {
        log::warn!("all pair sets are empty; composition will fail");
    }
    let entities = if skeletons_need_entities(l_q) {
        e_q.iter().cloned().collect()
    } else {
        BTreeSet::new()
    };
    DynamicVocabulary {
        pairs,
        entities,
        classes: pairs.classes().into_iter().map(String::from).collect(),
        relations: pairs.relations().into_iter().cloned().collect(),
        keywords: structural_keywords(),
    }
}

impl<'p> DynamicVocabulary<'p> {
    pub fn admits(&self, c: &Component) -> bool {
        match c {
            Component::Class(x) => self.classes.contains(x),
            Component::Relation(d) => self.relations.contains(d),
            Component::Entity(e) => self.entities.contains(e),
            Component::Literal(_) => true,
        }
    }
}

/// Relations paired with `last`: chain successors after a relation, `P_cr`
/// partners after a class. Other token classes are unchanged.
pub fn step_vocabulary<'p>(
    vocab: &DynamicVocabulary<'p>,
    last: &Component,
) -> Result<DynamicVocabulary<'p>, ComposeError> {
    if !vocab.admits(last) {
        return Err(ComposeError::Inadmissible(last.to_string()));
    }
    let relations = match last {
        Component::Relation(d) => vocab
            .pairs
            .relation_relation
            .iter()
            .filter(|p| p.first == *d)
            .map(|p| p.second.clone())
            .collect(),
        Component::Class(c) => vocab
            .pairs
            .class_relation
            .iter()
            .filter(|p| p.class == *c)
            .map(|p| p.relation.clone())
            .collect(),
        _ => vocab.relations.clone(),
    };
    Ok(DynamicVocabulary {
        relations,
        ..vocab.clone()
    })
}

/// One slot of a skeleton in filling order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub kind: Placeholder,
    /// Index of the slot whose component constrains this one.
    pub context: Option<usize>,
}

/// A skeleton rewritten with classes first in each conjunction, and its
/// slots in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPlan {
    template: SExpr,
    pub slots: Vec<Slot>,
}

fn flatten_and<'a>(e: &'a SExpr, out: &mut Vec<&'a SExpr>) {
    match e {
        SExpr::Node(Operator::And, args) => args.iter().for_each(|a| flatten_and(a, out)),
        _ => out.push(e),
    }
}

fn is_class_slot(e: &SExpr) -> bool {
    matches!(e, SExpr::Leaf(l) if l.placeholder() == Placeholder::Class)
}

/// Classes first, then the remaining operands in order, right-nested.
fn classes_first(e: &SExpr) -> SExpr {
    match e {
        SExpr::Leaf(_) => e.clone(),
        SExpr::Node(Operator::And, _) => {
            let mut ops = Vec::new();
            flatten_and(e, &mut ops);
            let (mut cls, rest): (Vec<&SExpr>, Vec<&SExpr>) = ops.into_iter().partition(|x| is_class_slot(x));
            cls.extend(rest);
            let mut it = cls.into_iter().rev().map(classes_first);
            let last = it.next().expect("AND has operands");
            it.fold(last, |acc, x| SExpr::and(x, acc))
        }
        SExpr::Node(op, args) => SExpr::Node(*op, args.iter().map(classes_first).collect()),
    }
}

impl SlotPlan {
    pub fn of(skeleton: &Skeleton) -> SlotPlan {
        let template = classes_first(skeleton.as_expr());
        let mut slots = Vec::new();
        plan_set(&template, None, &mut slots);
        SlotPlan { template, slots }
    }

    /// The expression with slot `i` replaced by `fill[i]`.
    pub fn instantiate(&self, fill: &[Component]) -> SExpr {
        fn go<'c>(e: &SExpr, it: &mut impl Iterator<Item = &'c Component>) -> SExpr {
            match e {
                SExpr::Leaf(_) => it.next().map_or_else(|| e.clone(), Component::to_expr),
                SExpr::Node(op, args) => SExpr::Node(*op, args.iter().map(|a| go(a, it)).collect()),
            }
        }
        go(&self.template, &mut fill.iter())
    }
}

/// Context of the answer variable of a set expression whose subject is
/// constrained by `ctx`.
fn plan_set(e: &SExpr, ctx: Option<usize>, slots: &mut Vec<Slot>) -> Option<usize> {
    match e {
        SExpr::Leaf(l) => {
            let kind = l.placeholder();
            let own = slots.len();
            slots.push(Slot { kind, context: ctx });
            (kind == Placeholder::Class).then_some(own)
        }
        SExpr::Node(Operator::And, args) => {
            // the class (first after reordering) constrains its siblings
            let first = plan_set(&args[0], ctx, slots);
            let inner = if is_class_slot(&args[0]) { first } else { ctx };
            plan_set(&args[1], inner, slots);
            if is_class_slot(&args[0]) {
                first
            } else {
                ctx
            }
        }
        SExpr::Node(Operator::Join, args) => {
            let last = plan_path(&args[0], ctx, slots);
            plan_set(&args[1], last, slots);
            ctx
        }
        SExpr::Node(Operator::Count, args) => plan_set(&args[0], ctx, slots),
        SExpr::Node(op, args) if op.is_superlative() => {
            let subject = plan_set(&args[0], ctx, slots);
            plan_path(&args[1], subject, slots);
            subject
        }
        SExpr::Node(op, args) if op.is_comparison() => {
            let last = plan_path(&args[0], ctx, slots);
            plan_set(&args[1], last, slots);
            ctx
        }
        SExpr::Node(_, args) => {
            for a in args {
                plan_set(a, None, slots);
            }
            None
        }
    }
}

/// Slots of a relation path; returns the last relation slot.
fn plan_path(e: &SExpr, ctx: Option<usize>, slots: &mut Vec<Slot>) -> Option<usize> {
    match e {
        SExpr::Leaf(l) => {
            slots.push(Slot {
                kind: l.placeholder(),
                context: ctx,
            });
            Some(slots.len() - 1)
        }
        SExpr::Node(Operator::Join, args) => {
            let mid = plan_path(&args[0], ctx, slots);
            plan_path(&args[1], mid, slots)
        }
        SExpr::Node(_, args) => args.iter().fold(ctx, |c, a| plan_path(a, c, slots)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposeConfig {
    pub beam: usize,
    /// Softmax temperature of the component pools.
    pub temperature: f64,
    /// Also require a non-empty answer.
    pub require_nonempty: bool,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            beam: 8,
            temperature: SOFTMAX_TEMPERATURE,
            require_nonempty: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceRecord {
    Step {
        skeleton: String,
        step: usize,
        slot: &'static str,
        /// Admissible components summed over the incoming states.
        admissible: usize,
        states: usize,
        chosen: Option<String>,
        score: Option<f64>,
    },
    Rejected {
        expression: String,
        reason: &'static str,
    },
    Result {
        expression: Option<String>,
        score: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Answer {
        #[serde(serialize_with = "crate::composer::display_expr")]
        expression: SExpr,
        score: f64,
        #[serde(serialize_with = "crate::skeleton::display")]
        skeleton: Skeleton,
    },
    Unanswerable,
}

fn display_expr<S: serde::Serializer>(e: &SExpr, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Composition {
    pub outcome: Outcome,
    pub trace: Vec<TraceRecord>,
}

impl Composition {
    pub fn expression(&self) -> Option<&SExpr> {
        match &self.outcome {
            Outcome::Answer { expression, .. } => Some(expression),
            Outcome::Unanswerable => None,
        }
    }

    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }
}

/// Softmax pools over the candidate scores, and the additive score of one
/// component.
#[derive(Debug, Clone)]
pub struct ComponentScores {
    relations: NormalizedPool,
    classes: NormalizedPool,
}

impl ComponentScores {
    pub fn new(c: &ComponentCandidates, temperature: f64) -> ComponentScores {
        let pool = |xs: &[ScoredCandidate]| {
            NormalizedPool::with_temperature(xs.iter().map(|r| (r.id.clone(), r.semantic)), temperature)
        };
        ComponentScores {
            relations: pool(&c.relations),
            classes: pool(&c.classes),
        }
    }

    pub fn of(&self, c: &Component) -> f64 {
        match c {
            Component::Class(x) => self.classes.get(x).unwrap_or(0.0),
            Component::Relation(d) => self.relations.get(&d.relation).unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

/// Pair lookups keyed by the constraining component.
struct PairIndex<'a> {
    initial: Vec<&'a DirRel>,
    by_class: BTreeMap<&'a str, Vec<&'a DirRel>>,
    by_relation: BTreeMap<&'a DirRel, Vec<&'a DirRel>>,
    objects: BTreeMap<&'a DirRel, BTreeSet<&'a str>>,
}

impl<'a> PairIndex<'a> {
    fn new(pairs: &'a PairSets) -> PairIndex<'a> {
        let mut by_class: BTreeMap<&str, Vec<&DirRel>> = BTreeMap::new();
        for p in &pairs.class_relation {
            by_class.entry(&p.class).or_default().push(&p.relation);
        }
        let mut by_relation: BTreeMap<&DirRel, Vec<&DirRel>> = BTreeMap::new();
        for p in &pairs.relation_relation {
            by_relation.entry(&p.first).or_default().push(&p.second);
        }
        let mut objects: BTreeMap<&DirRel, BTreeSet<&str>> = BTreeMap::new();
        for p in &pairs.relation_entity {
            objects.entry(&p.relation).or_default().insert(&p.entity);
        }
        PairIndex {
            initial: pairs.relations().into_iter().collect(),
            by_class,
            by_relation,
            objects,
        }
    }
}

#[derive(Debug, Clone)]
struct State {
    fill: Vec<Component>,
    score: f64,
    key: String,
}

/// Candidate components for slot `slot` given the filled prefix.
fn admissible(
    slot: Slot,
    fill: &[Component],
    idx: &PairIndex,
    classes: &[&str],
    c: &ComponentCandidates,
) -> Vec<Component> {
    let ctx = slot.context.map(|i| &fill[i]);
    match slot.kind {
        Placeholder::Class => classes.iter().map(|x| Component::Class(x.to_string())).collect(),
        Placeholder::Rel => {
            let rels: &[&DirRel] = match ctx {
                Some(Component::Class(k)) => idx.by_class.get(k.as_str()).map_or(&[], Vec::as_slice),
                Some(Component::Relation(d)) => idx.by_relation.get(d).map_or(&[], Vec::as_slice),
                _ => &idx.initial,
            };
            rels.iter().map(|d| Component::Relation((*d).clone())).collect()
        }
        Placeholder::Entity => {
            let objects = match ctx {
                Some(Component::Relation(d)) => Some(idx.objects.get(d)),
                _ => None,
            };
            c.entities
                .iter()
                .filter(|e| match objects {
                    Some(set) => set.is_some_and(|s| s.contains(e.as_str())),
                    None => true,
                })
                .filter(|e| !fill.contains(&Component::Entity((*e).clone())))
                .map(|e| Component::Entity(e.clone()))
                .collect()
        }
        Placeholder::Literal => c
            .literals
            .iter()
            .filter(|l| !fill.contains(&Component::Literal((*l).clone())))
            .map(|l| Component::Literal(l.clone()))
            .collect(),
    }
}

/// Whether `fill` satisfies every slot constraint of `plan` (the
/// predicate the beam search enforces step by step).
pub fn satisfies_pairs(plan: &SlotPlan, fill: &[Component], pairs: &PairSets, c: &ComponentCandidates) -> bool {
    if fill.len() != plan.slots.len() {
        return false;
    }
    let idx = PairIndex::new(pairs);
    let classes: Vec<&str> = pairs.classes().into_iter().collect();
    plan.slots
        .iter()
        .enumerate()
        .all(|(i, s)| admissible(*s, &fill[..i], &idx, &classes, c).contains(&fill[i]))
}

/// Beam search over every skeleton of `candidates`, pooled, then filtered
/// by executability. The best survivor wins; ties go to the smaller text.
pub fn compose(
    candidates: &ComponentCandidates,
    pairs: &PairSets,
    kb: &KnowledgeBase,
    config: ComposeConfig,
) -> Composition {
    let scores = ComponentScores::new(candidates, config.temperature);
    let idx = PairIndex::new(pairs);
    let classes: Vec<&str> = pairs.classes().into_iter().collect();
    let beam = config.beam.max(1);
    let mut trace = Vec::new();
    let mut finals: Vec<(f64, String, SExpr, &Skeleton)> = Vec::new();

    for sc in &candidates.skeletons {
        let plan = SlotPlan::of(&sc.skeleton);
        let name = sc.skeleton.to_string();
        let mut states = vec![State {
            fill: Vec::new(),
            score: sc.score,
            key: String::new(),
        }];
        for (step, slot) in plan.slots.iter().enumerate() {
            let mut next = Vec::new();
            let mut offered = 0;
            for st in &states {
                let opts = admissible(*slot, &st.fill, &idx, &classes, candidates);
                offered += opts.len();
                for comp in opts {
                    let mut fill = st.fill.clone();
                    let score = st.score + scores.of(&comp);
                    let key = format!("{} {comp}", st.key);
                    fill.push(comp);
                    next.push(State { fill, score, key });
                }
            }
            next.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key.cmp(&b.key)));
            next.truncate(beam);
            trace.push(TraceRecord::Step {
                skeleton: name.clone(),
                step,
                slot: slot.kind.name(),
                admissible: offered,
                states: next.len(),
                chosen: next.first().and_then(|s| s.fill.last()).map(|c| c.to_string()),
                score: next.first().map(|s| s.score),
            });
            states = next;
            if states.is_empty() {
                break;
            }
        }
        for st in states {
            let expr = plan.instantiate(&st.fill);
            finals.push((st.score, expr.to_string(), expr, &sc.skeleton));
        }
    }

    finals.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let opts = ExecOptions {
        require_nonempty: config.require_nonempty,
    };
    let mut outcome = Outcome::Unanswerable;
    for (score, text, expr, sk) in finals {
        match check_executable(&expr, kb, opts) {
            Ok(()) => {
                outcome = Outcome::Answer {
                    expression: expr,
                    score,
                    skeleton: sk.clone(),
                };
                break;
            }
            Err(r) => trace.push(TraceRecord::Rejected {
                expression: text,
                reason: Rejection::code(&r),
            }),
        }
    }
    trace.push(match &outcome {
        Outcome::Answer { expression, score, .. } => TraceRecord::Result {
            expression: Some(expression.to_string()),
            score: Some(*score),
        },
        Outcome::Unanswerable => TraceRecord::Result {
            expression: None,
            score: None,
        },
    });
    Composition { outcome, trace }
}
