//! Fine-to-coarse composition for knowledge-base question answering.
//!
//! The pipeline detects fine-grained components for a question (relations,
//! classes, entities and a logical skeleton), keeps only the component pairs
//! that are connected in the knowledge base, and composes an s-expression
//! from those pairs with a constrained search that only ever emits
//! executable expressions.

pub mod logical_form;
pub mod kb;
pub mod toy;
pub mod synth;
pub mod exec;
pub mod retrieval;
pub mod linking;
pub mod skeleton;
pub mod midgrain;
pub mod composer;
pub mod pipeline;
pub mod harness;
