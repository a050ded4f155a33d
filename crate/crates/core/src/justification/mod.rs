//! Argued decisions: six-part records composed through a prompt chain, scoring
//! of competing explanations, the human gate before enactment, and provenance
//! export.

mod gate;
mod prov;
mod record;
mod scoring;

use thiserror::Error;

pub use gate::{enact, gate_decision, EnactmentPermit, GateOutcome, Verdict, VerdictInput};
pub use prov::{decision_activity, export_provenance, Attributes, ProvDocument};
pub use record::{
    compose_justification, replay_justification, Attack, Decision, EvidenceItem,
    JustificationRecord, JustificationRequest, Part, PromptExchange, Qualifier, Rebuttal,
    RiskTier, Status, MAX_ATTEMPTS, TEMPLATE_VERSION,
};
pub use scoring::{
    assess_evidence, score_explanation, select_best_claim, select_by, Candidate,
    EvidenceAssessment, EvidenceProfile, ExplanationScore, Loveliness, RankedCandidate,
    Selection, Validity,
};

use crate::generator::GeneratorError;
use crate::workflow::PrincipalId;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ComposeError {
    #[error("intent must not be empty")]
    EmptyIntent,
    #[error("evidence {id:?}: {reason}")]
    InvalidEvidence { id: String, reason: String },
    #[error("generator failed at {stage}: {error}")]
    Generator { stage: Part, error: GeneratorError },
    #[error("{part} still unusable after {attempts} attempts: {reason}")]
    Incomplete {
        part: Part,
        attempts: u32,
        reason: String,
    },
    #[error("template: {0}")]
    Template(String),
}

impl ComposeError {
    pub fn code(&self) -> &'static str {
        match self {
            ComposeError::EmptyIntent => "empty-intent",
            ComposeError::InvalidEvidence { .. } => "invalid-evidence",
            ComposeError::Generator { .. } => "generator-failure",
            ComposeError::Incomplete { .. } => "incomplete-generation",
            ComposeError::Template(_) => "template",
        }
    }
}

#[derive(Debug, Clone, Copy, Error, PartialEq)]
pub enum ScoreError {
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("no candidates to choose from")]
    NoCandidates,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GateError {
    #[error("justification {id} is already {}", .status.as_str())]
    AlreadyTerminal { id: String, status: Status },
    #[error("{actor} lacks the operator role")]
    Unauthorized { actor: PrincipalId },
    #[error("a verdict needs a rationale")]
    EmptyRationale,
    #[error("record is missing {}", display_parts(.missing))]
    Incomplete { missing: Vec<Part> },
    #[error("rebuttals neither answered nor accepted: {}", .0.join(", "))]
    UnansweredRebuttals(Vec<String>),
    #[error("verdict accepts unknown rebuttal {0:?}")]
    UnknownRebuttal(String),
    #[error("justification {id} ({}) may not be enacted", .status.as_str())]
    EnactmentBlocked { id: String, status: Status },
}

fn display_parts(parts: &[Part]) -> String {
    parts
        .iter()
        .map(|p| p.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

impl GateError {
    pub fn code(&self) -> &'static str {
        match self {
            GateError::AlreadyTerminal { .. } => "already-terminal",
            GateError::Unauthorized { .. } => "unauthorized-role",
            GateError::EmptyRationale => "empty-rationale",
            GateError::Incomplete { .. } => "incomplete-record",
            GateError::UnansweredRebuttals(_) => "unanswered-rebuttals",
            GateError::UnknownRebuttal(_) => "unknown-rebuttal",
            GateError::EnactmentBlocked { .. } => "enactment-blocked",
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProvError {
    #[error("justification {id} is still {}", .status.as_str())]
    NotTerminal { id: String, status: Status },
}
