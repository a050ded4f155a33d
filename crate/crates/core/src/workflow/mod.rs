//! Human validation lifecycle: workflow states and role checks, consistency and
//! constraint checks, and the append-only audit trail.

mod audit;
mod consistency;
mod constraint;
mod state;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use audit::{
    AuditAction, AuditEvent, AuditFilter, AuditLog, Clock, GateDecision, StepClock, Subject,
    SubjectFilter, SystemClock,
};
pub use consistency::{
    consistency_check, consistency_check_at, CheckReport, Finding, Issue, Severity,
};
pub use constraint::{
    check_constraints, parse_constraints, Constraint, ConstraintError, Fact, FactSet, Predicate,
    Scope, Selector, Violation,
};
pub use state::{authorize_transition, Principal, PrincipalId, Role, WorkflowState};

use crate::knowledge::KnowledgeModel;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum WorkflowError {
    #[error("unknown workflow state {0:?}")]
    UnknownState(String),
    #[error("unknown role {0:?}")]
    UnknownRole(String),
    #[error("principal header {0:?} is not of the form id;role,role")]
    MalformedPrincipal(String),
    #[error("transition {from} -> {to} is not allowed")]
    IllegalTransition {
        from: WorkflowState,
        to: WorkflowState,
    },
    #[error("{actor} lacks a required role ({})", roles(.required))]
    UnauthorizedRole {
        actor: PrincipalId,
        required: Vec<Role>,
    },
    #[error("a rationale is required")]
    EmptyRationale,
    #[error("consistency check failed with {} error(s)", .0.errors().count())]
    ConsistencyBlocked(CheckReport),
    #[error("audit sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
}

impl WorkflowError {
    /// Stable machine-readable code, used in API problem details.
    pub fn code(&self) -> &'static str {
        match self {
            WorkflowError::UnknownState(_) => "unknown-state",
            WorkflowError::UnknownRole(_) => "unknown-role",
            WorkflowError::MalformedPrincipal(_) => "malformed-principal",
            WorkflowError::IllegalTransition { .. } => "illegal-transition",
            WorkflowError::UnauthorizedRole { .. } => "unauthorized-role",
            WorkflowError::EmptyRationale => "empty-rationale",
            WorkflowError::ConsistencyBlocked(_) => "consistency-blocked",
            WorkflowError::SequenceGap { .. } => "sequence-gap",
        }
    }
}

fn roles(required: &[Role]) -> String {
    required
        .iter()
        .map(|r| r.as_str())
        .collect::<Vec<_>>()
        .join(" or ")
}

/// Moves `model` to `target`, appending exactly one event to `log`.
///
/// Entering review requires a consistency report without errors; entering
/// ready-to-publish additionally requires every class to be defined.
pub fn transition(
    model: &KnowledgeModel,
    target: WorkflowState,
    actor: &Principal,
    rationale: &str,
    log: &mut AuditLog,
    now: DateTime<Utc>,
) -> Result<KnowledgeModel, WorkflowError> {
    let from = model.state();
    authorize_transition(from, target, actor)?;
    if rationale.trim().is_empty() {
        return Err(WorkflowError::EmptyRationale);
    }
    let gate = match (from, target) {
        (WorkflowState::Draft, WorkflowState::InReview) => Some(consistency_check_at(model, from)),
        (WorkflowState::InReview, WorkflowState::ReadyToPublish) => {
            Some(consistency_check_at(model, target))
        }
        _ => None,
    };
    if let Some(report) = gate {
        if report.has_errors() {
            return Err(WorkflowError::ConsistencyBlocked(report));
        }
    }
    let mut next = model.clone();
    next.set_state(target);
    log.append(
        now,
        actor.id.clone(),
        AuditAction::Transition { from, to: target },
        Subject::Model {
            model: model.id().clone(),
            version: model.version(),
        },
        rationale,
    );
    Ok(next)
}
