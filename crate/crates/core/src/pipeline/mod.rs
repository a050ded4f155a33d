//! The twelve-step enhancement procedure: a generator proposes elements,
//! relationships, implicit classes, exemplars and definitions for a new
//! knowledge source; the result is a Draft candidate that people then
//! validate, publish and merge into a root model.
//!
//! Steps 1 to 9 run unattended. Each step's prompt, raw response and parsed
//! artifact go into the step log, and the run can be checkpointed (it is plain
//! serializable data) and resumed after any failed step.

mod run;

use thiserror::Error;

pub use run::{
    identify_implicit_classes, resume_enhancement, run_enhancement, ClassExemplar, ClassProposal,
    DroppedProposal, EnhancementRun, ImplicitClasses, RejectedProposal, SourceDocument,
    StepArtifact, StepFailure, StepRecord, TransitionRecord, STEP_TITLES, TEMPLATE_VERSION,
};

use crate::generator::GeneratorError;
use crate::knowledge::{MergeError, ModelError};
use crate::ontology::OntologyError;
use crate::workflow::{CheckReport, WorkflowError};

/// Why a single step did not complete.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum StepError {
    #[error("generator: {0}")]
    Generator(GeneratorError),
    #[error("unparseable response: {0}")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("base model is inconsistent: {} error(s)", .0.errors().count())]
    BaseInconsistent(CheckReport),
    #[error("knowledge source is empty")]
    EmptySource,
    #[error("step {step} failed ({cause}); run can resume from step {step}")]
    Interrupted {
        step: u8,
        cause: StepError,
        checkpoint: Box<EnhancementRun>,
    },
    #[error("checkpoint was taken against {expected}, not {found}")]
    BaseMismatch { expected: String, found: String },
    #[error("step {requested} cannot run before step {next}")]
    OutOfOrder { requested: u8, next: u8 },
    #[error("candidate is invalid: {0}")]
    Model(#[from] ModelError),
    #[error("export failed: {0}")]
    Export(#[from] OntologyError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::BaseInconsistent(_) => "base-inconsistent",
            PipelineError::EmptySource => "empty-source",
            PipelineError::Interrupted {
                cause: StepError::Generator(_),
                ..
            } => "generator-failure",
            PipelineError::Interrupted { .. } => "parse-failure",
            PipelineError::BaseMismatch { .. } => "base-mismatch",
            PipelineError::OutOfOrder { .. } => "out-of-order",
            PipelineError::Model(_) => "invalid-candidate",
            PipelineError::Export(e) => e.code(),
            PipelineError::Workflow(e) => e.code(),
            PipelineError::Merge(_) => "merge-failed",
        }
    }

    /// The resumable state, when a step failed.
    pub fn checkpoint(&self) -> Option<&EnhancementRun> {
        match self {
            PipelineError::Interrupted { checkpoint, .. } => Some(checkpoint),
            _ => None,
        }
    }
}
