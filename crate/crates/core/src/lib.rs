//! Knowledge orchestration with inspectable decisions.

pub mod context;
pub mod engine;
pub mod eval;
pub mod fixtures;
pub mod generator;
pub mod justification;
pub mod knowledge;
pub mod ontology;
pub mod pipeline;
mod template;
pub mod workflow;
