//! Append-only audit trail. Sequence numbers start at 1 and have no gaps;
//! events are never modified once appended.

use std::fmt;
use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::state::{PrincipalId, WorkflowState};
use super::WorkflowError;
use crate::knowledge::ModelId;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock advancing one second per reading.
#[derive(Debug)]
pub struct StepClock {
    next: AtomicI64,
}

impl StepClock {
    pub fn starting_at(start: DateTime<Utc>) -> Self {
        Self {
            next: AtomicI64::new(start.timestamp()),
        }
    }
}

impl Default for StepClock {
    fn default() -> Self {
        Self::starting_at(Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap())
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let secs = self.next.fetch_add(1, Ordering::SeqCst);
        Utc.timestamp_opt(secs, 0).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Subject {
    Model { model: ModelId, version: u64 },
    Justification { justification: String },
}

impl Subject {
    pub fn model_id(&self) -> Option<&ModelId> {
        match self {
            Subject::Model { model, .. } => Some(model),
            Subject::Justification { .. } => None,
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Model { model, version } => write!(f, "model {model} v{version}"),
            Subject::Justification { justification } => write!(f, "justification {justification}"),
        }
    }
}

/// Outcome of a decision gate, as recorded in the trail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateDecision {
    Approved,
    Rejected,
    /// Low-risk decision recorded without prior human inspection.
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AuditAction {
    ModelCreated,
    ModelImported,
    ModelMutated {
        op: String,
    },
    ModelForked,
    ModelsMerged {
        parents: Vec<ModelId>,
    },
    Transition {
        from: WorkflowState,
        to: WorkflowState,
    },
    JustificationComposed,
    Gate {
        decision: GateDecision,
    },
}

impl AuditAction {
    pub fn is_transition(&self) -> bool {
        matches!(self, AuditAction::Transition { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AuditEvent {
    pub sequence: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: PrincipalId,
    pub action: AuditAction,
    pub subject: Subject,
    pub rationale: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubjectFilter {
    #[default]
    Any,
    Model(ModelId),
    Justification(String),
}

impl SubjectFilter {
    fn matches(&self, subject: &Subject) -> bool {
        match (self, subject) {
            (SubjectFilter::Any, _) => true,
            (SubjectFilter::Model(id), Subject::Model { model, .. }) => id == model,
            (SubjectFilter::Justification(id), Subject::Justification { justification }) => {
                id == justification
            }
            _ => false,
        }
    }
}

/// Subject plus a half-open `[from, until)` time window; absent bounds are open.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditFilter {
    pub subject: SubjectFilter,
    pub from: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
}

impl AuditFilter {
    pub fn model(id: ModelId) -> Self {
        Self {
            subject: SubjectFilter::Model(id),
            ..Self::default()
        }
    }

    pub fn justification(id: impl Into<String>) -> Self {
        Self {
            subject: SubjectFilter::Justification(id.into()),
            ..Self::default()
        }
    }

    pub fn matches(&self, event: &AuditEvent) -> bool {
        self.subject.matches(&event.subject)
            && self.from.is_none_or(|t| event.timestamp >= t)
            && self.until.is_none_or(|t| event.timestamp < t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditLog {
    events: Vec<AuditEvent>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a log from persisted events, refusing gaps or reordering.
    pub fn from_events(events: Vec<AuditEvent>) -> Result<Self, WorkflowError> {
        for (i, e) in events.iter().enumerate() {
            let expected = i as u64 + 1;
            if e.sequence != expected {
                return Err(WorkflowError::SequenceGap {
                    expected,
                    found: e.sequence,
                });
            }
        }
        Ok(Self { events })
    }

    pub fn next_sequence(&self) -> u64 {
        self.events.len() as u64 + 1
    }

    pub fn append(
        &mut self,
        timestamp: DateTime<Utc>,
        actor: PrincipalId,
        action: AuditAction,
        subject: Subject,
        rationale: impl Into<String>,
    ) -> &AuditEvent {
        let event = AuditEvent {
            sequence: self.next_sequence(),
            timestamp,
            actor,
            action,
            subject,
            rationale: rationale.into(),
        };
        self.events.push(event);
        self.events.last().expect("just pushed")
    }

    /// Appends a fully formed event; its sequence must be the next one.
    pub fn push(&mut self, event: AuditEvent) -> Result<(), WorkflowError> {
        let expected = self.next_sequence();
        if event.sequence != expected {
            return Err(WorkflowError::SequenceGap {
                expected,
                found: event.sequence,
            });
        }
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Every event matching the filter, in sequence order.
    pub fn trail(&self, filter: &AuditFilter) -> Vec<AuditEvent> {
        self.events
            .iter()
            .filter(|e| filter.matches(e))
            .cloned()
            .collect()
    }
}
