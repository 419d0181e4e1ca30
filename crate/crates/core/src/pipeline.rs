//! The full question-to-expression pipeline over one KB, with per-stage
//! timings.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use crate::composer::{compose, ComponentCandidates, ComposeConfig, Composition};
use crate::exec::execute;
use crate::kb::KnowledgeBase;
use crate::linking::{link, LinkResult, NameTrie};
use crate::midgrain::{PairOptions, PairSets};
use crate::retrieval::{scorer_by_name, ComponentIndex, ComponentKind, RetrievalConfig, RetrievalError, Scorer, ScorerError};
use crate::skeleton::{HeuristicSkeletonScorer, Proposer, SkeletonScorer};

pub const CANDIDATE_SELECTION: &str = "candidate_selection";
pub const ENUMERATION: &str = "enumeration";
pub const COMPOSITION: &str = "composition";
pub const STAGES: [&str; 3] = [CANDIDATE_SELECTION, ENUMERATION, COMPOSITION];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub retrieval: RetrievalConfig,
    pub compose: ComposeConfig,
    pub pairs: PairOptions,
    pub max_hops: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            retrieval: RetrievalConfig::default(),
            compose: ComposeConfig::default(),
            pairs: PairOptions::default(),
            max_hops: 4,
        }
    }
}

/// Milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub candidate_selection: f64,
    pub enumeration: f64,
    pub composition: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.candidate_selection + self.enumeration + self.composition
    }

    pub fn stage(&self, name: &str) -> Option<f64> {
        match name {
            CANDIDATE_SELECTION => Some(self.candidate_selection),
            ENUMERATION => Some(self.enumeration),
            COMPOSITION => Some(self.composition),
            _ => None,
        }
    }

    pub fn add(&mut self, other: &StageTimings) {
        self.candidate_selection += other.candidate_selection;
        self.enumeration += other.enumeration;
        self.composition += other.composition;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("skeleton scorer: {0}")]
    Skeleton(#[from] ScorerError),
    #[error("unknown scorer `{0}`")]
    UnknownScorer(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub question: String,
    pub link: LinkResult,
    pub candidates: ComponentCandidates,
    pub pairs: PairSets,
    pub composition: Composition,
    /// Answers of the composed expression, as text.
    pub answers: Option<BTreeSet<String>>,
    pub timings: StageTimings,
}

pub struct Pipeline {
    kb: KnowledgeBase,
    index: ComponentIndex,
    trie: NameTrie,
    proposer: Proposer,
    scorer: Box<dyn Scorer>,
    skeleton_scorer: Box<dyn SkeletonScorer>,
    config: PipelineConfig,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl Pipeline {
    /// TF-IDF component scorer and the heuristic skeleton scorer.
    pub fn new(kb: KnowledgeBase, config: PipelineConfig) -> Pipeline {
        let scorer = scorer_by_name("tfidf", &kb).expect("bundled scorer");
        Pipeline::with_scorers(kb, config, scorer, Box::new(HeuristicSkeletonScorer))
    }

    pub fn with_scorers(
        kb: KnowledgeBase,
        config: PipelineConfig,
        scorer: Box<dyn Scorer>,
        skeleton_scorer: Box<dyn SkeletonScorer>,
    ) -> Pipeline {
        Pipeline {
            index: ComponentIndex::build(&kb),
            trie: NameTrie::build(&kb),
            proposer: Proposer::new(config.max_hops),
            kb,
            scorer,
            skeleton_scorer,
            config,
        }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Retrieval, linking and skeleton proposal.
    pub fn candidates(&self, question: &str) -> Result<(LinkResult, ComponentCandidates), PipelineError> {
        let rc = &self.config.retrieval;
        let relations = self
            .index
            .top_k_components(question, ComponentKind::Relation, rc, self.scorer.as_ref())?;
        let classes = self
            .index
            .top_k_components(question, ComponentKind::Class, rc, self.scorer.as_ref())?;
        let r_q: Vec<String> = relations.iter().map(|c| c.id.clone()).collect();
        let linked = link(question, &self.trie, &r_q, &self.kb);
        let skeletons = self.proposer.propose(&linked.masked, self.skeleton_scorer.as_ref())?;
        let candidates = ComponentCandidates {
            relations,
            classes,
            entities: linked.entities.clone(),
            literals: linked.literals.iter().map(|l| l.value.clone()).collect(),
            skeletons,
        };
        Ok((linked, candidates))
    }

    pub fn pairs(&self, c: &ComponentCandidates) -> PairSets {
        PairSets::build(
            &c.class_ids(),
            &c.relation_ids(),
            &c.entities,
            &c.skeleton_list(),
            &self.kb,
            self.config.pairs,
        )
    }

    pub fn answer(&self, question: &str) -> Result<Prediction, PipelineError> {
        let t0 = Instant::now();
        let (link, candidates) = self.candidates(question)?;
        let candidate_selection = ms(t0);
        let t1 = Instant::now();
        let pairs = self.pairs(&candidates);
        let enumeration = ms(t1);
        let t2 = Instant::now();
        let composition = compose(&candidates, &pairs, &self.kb, self.config.compose);
        let composition_ms = ms(t2);
        let answers = composition
            .expression()
            .and_then(|e| execute(e, &self.kb).ok())
            .map(|a| a.to_strings());
        Ok(Prediction {
            question: question.to_string(),
            link,
            candidates,
            pairs,
            composition,
            answers,
            timings: StageTimings {
                candidate_selection,
                enumeration,
                composition: composition_ms,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::toy_kb;

    #[test]
    fn running_example_end_to_end() {
        let p = Pipeline::new(toy_kb(), PipelineConfig::default());
        let out = p.answer("the terminuses of Antonio belongs to what railway?").unwrap();
        assert_eq!(out.link.masked, "the terminuses of <entity0> belongs to what railway?");
        assert_eq!(
            out.composition.expression().map(|e| e.to_string()).as_deref(),
            Some("(AND railway.railway (JOIN rail.railway.terminuses m.antonio_station))")
        );
        assert_eq!(
            out.answers.unwrap().into_iter().collect::<Vec<_>>(),
            vec!["m.coastal_line".to_string()]
        );
        assert!(out.timings.total() >= 0.0);
    }
}
