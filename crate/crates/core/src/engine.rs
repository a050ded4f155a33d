//! A registry of models and justifications in which every change is an
//! audit event. Replaying the events from nothing rebuilds the registry.
//!
//! Each committed change is one [`Event`]: the audit record plus, where the
//! audit record alone cannot reproduce the change, a payload (full model
//! content, a mutation, or the justification record).

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::TextGenerator;
use crate::justification::{
    compose_justification, gate_decision, ComposeError, GateError, GateOutcome,
    JustificationRecord, JustificationRequest, Status, VerdictInput,
};
use crate::knowledge::{
    merge_models, KnowledgeModel, MergeError, ModelError, ModelId, ModelParts, Mutation,
    MutationLog, Resolution, SourceRef,
};
use crate::workflow::{
    transition, AuditAction, AuditEvent, AuditFilter, AuditLog, Clock, GateDecision, Principal,
    Role, Subject, SystemClock, WorkflowError, WorkflowState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "payload", rename_all = "kebab-case")]
pub enum Payload {
    Model { model: ModelParts },
    Mutation { mutation: Mutation },
    Justification { record: Box<JustificationRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Event {
    pub audit: AuditEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{actor} needs one of the roles {}", roles(.required))]
    Unauthorized { actor: String, required: Vec<Role> },
    #[error("no model {0}")]
    UnknownModel(ModelId),
    #[error("model {0} already exists")]
    ModelExists(ModelId),
    #[error("no justification {0}")]
    UnknownJustification(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("event {sequence} cannot be replayed: {reason}")]
    Replay { sequence: u64, reason: String },
}

fn roles(required: &[Role]) -> String {
    required
        .iter()
        .map(|r| r.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Unauthorized { .. } => "unauthorized-role",
            EngineError::UnknownModel(_) => "unknown-model",
            EngineError::ModelExists(_) => "model-exists",
            EngineError::UnknownJustification(_) => "unknown-justification",
            EngineError::Model(_) => "invalid-model",
            EngineError::Workflow(e) => e.code(),
            EngineError::Merge(MergeError::UncoveredConflicts(_)) => "unresolved-conflicts",
            EngineError::Merge(_) => "merge-failed",
            EngineError::Compose(e) => e.code(),
            EngineError::Gate(e) => e.code(),
            EngineError::Replay { .. } => "corrupt-store",
        }
    }
}

/// A model with the mutations committed since it entered the registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelEntry {
    pub genesis: KnowledgeModel,
    pub mutations: MutationLog,
    pub current: KnowledgeModel,
}

pub struct Engine {
    models: BTreeMap<ModelId, ModelEntry>,
    justifications: BTreeMap<String, JustificationRecord>,
    audit: AuditLog,
    events: Vec<Event>,
    clock: Arc<dyn Clock>,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new(Arc::new(SystemClock))
    }
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("models", &self.models.len())
            .field("justifications", &self.justifications.len())
            .field("events", &self.events.len())
            .finish()
    }
}

fn require_role(actor: &Principal, required: &[Role]) -> Result<(), EngineError> {
    if actor.has_any(required) {
        Ok(())
    } else {
        Err(EngineError::Unauthorized {
            actor: actor.id.to_string(),
            required: required.to_vec(),
        })
    }
}

fn model_subject(m: &KnowledgeModel) -> Subject {
    Subject::Model {
        model: m.id().clone(),
        version: m.version(),
    }
}

fn op_name(m: &Mutation) -> &'static str {
    match m {
        Mutation::AddClass { .. } => "add-class",
        Mutation::AddRelationship { .. } => "add-relationship",
        Mutation::RemoveRelationship { .. } => "remove-relationship",
        Mutation::SetDefinition { .. } => "set-definition",
        Mutation::AddProperty { .. } => "add-property",
        Mutation::AddExemplar { .. } => "add-exemplar",
        Mutation::Fork => "fork",
    }
}

impl Engine {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            models: BTreeMap::new(),
            justifications: BTreeMap::new(),
            audit: AuditLog::new(),
            events: Vec::new(),
            clock,
        }
    }

    /// Rebuilds an engine from persisted events, checking each one against
    /// the state it is applied to.
    pub fn replay(
        events: impl IntoIterator<Item = Event>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EngineError> {
        let mut engine = Self::new(clock);
        for event in events {
            let sequence = event.audit.sequence;
            engine
                .audit
                .push(event.audit.clone())
                .map_err(|e| EngineError::Replay {
                    sequence,
                    reason: e.to_string(),
                })?;
            engine.apply(&event).map_err(|reason| EngineError::Replay { sequence, reason })?;
            engine.events.push(event);
        }
        Ok(engine)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn trail(&self, filter: &AuditFilter) -> Vec<AuditEvent> {
        self.audit.trail(filter)
    }

    pub fn models(&self) -> impl Iterator<Item = &KnowledgeModel> {
        self.models.values().map(|e| &e.current)
    }

    pub fn model(&self, id: &ModelId) -> Option<&KnowledgeModel> {
        self.models.get(id).map(|e| &e.current)
    }

    pub fn entry(&self, id: &ModelId) -> Option<&ModelEntry> {
        self.models.get(id)
    }

    pub fn justifications(&self) -> impl Iterator<Item = &JustificationRecord> {
        self.justifications.values()
    }

    pub fn justification(&self, id: &str) -> Option<&JustificationRecord> {
        self.justifications.get(id)
    }

    /// Content hash of every model plus the justification records, for
    /// comparing two engines.
    pub fn state_digest(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = self
            .models
            .values()
            .map(|e| {
                let m = &e.current;
                (
                    format!("model:{}", m.id()),
                    format!("v{} {} {}", m.version(), m.state().as_str(), m.content_hash()),
                )
            })
            .collect();
        for (id, r) in &self.justifications {
            let json = serde_json::to_string(r).expect("record serializes");
            out.insert(format!("justification:{id}"), json);
        }
        out
    }

    fn current(&self, id: &ModelId) -> Result<&KnowledgeModel, EngineError> {
        self.model(id).ok_or_else(|| EngineError::UnknownModel(id.clone()))
    }

    /// Records the event the audit log just received and applies it.
    fn commit(&mut self, payload: Option<Payload>) -> &Event {
        let audit = self
            .audit
            .events()
            .last()
            .expect("an audit event was just appended")
            .clone();
        let event = Event { audit, payload };
        if let Err(reason) = self.apply(&event) {
            panic!("validated change failed to apply: {reason}");
        }
        self.events.push(event);
        self.events.last().expect("just pushed")
    }

    fn append(
        &mut self,
        actor: &Principal,
        action: AuditAction,
        subject: Subject,
        rationale: String,
        payload: Option<Payload>,
    ) -> &Event {
        let now = self.clock.now();
        self.audit
            .append(now, actor.id.clone(), action, subject, rationale);
        self.commit(payload)
    }

    /// The single place where events change state, live or replayed.
    fn apply(&mut self, event: &Event) -> Result<(), String> {
        let a = &event.audit;
        let subject_model = || match &a.subject {
            Subject::Model { model, version } => Ok((model.clone(), *version)),
            other => Err(format!("expected a model subject, found {other}")),
        };
        match (&a.action, &event.payload) {
            (
                AuditAction::ModelCreated | AuditAction::ModelImported | AuditAction::ModelsMerged { .. },
                Some(Payload::Model { model }),
            ) => {
                let (id, version) = subject_model()?;
                let model = KnowledgeModel::from_parts(model.clone());
                if model.id() != &id || model.version() != version {
                    return Err("payload does not match the subject".into());
                }
                if self.models.contains_key(&id) {
                    return Err(format!("model {id} already exists"));
                }
                self.models.insert(
                    id,
                    ModelEntry {
                        genesis: model.clone(),
                        mutations: MutationLog::new(),
                        current: model,
                    },
                );
            }
            (
                AuditAction::ModelMutated { .. } | AuditAction::ModelForked,
                Some(Payload::Mutation { mutation }),
            ) => {
                let (id, version) = subject_model()?;
                let entry = self.models.get_mut(&id).ok_or(format!("no model {id}"))?;
                let next = entry.current.apply(mutation).map_err(|e| e.to_string())?;
                if next.version() != version {
                    return Err(format!("mutation yields v{}, event says v{version}", next.version()));
                }
                entry.mutations.push(mutation.clone());
                entry.current = next;
            }
            (AuditAction::Transition { from, to }, None) => {
                let (id, version) = subject_model()?;
                let entry = self.models.get_mut(&id).ok_or(format!("no model {id}"))?;
                if entry.current.state() != *from || entry.current.version() != version {
                    return Err(format!(
                        "model {id} is v{} {}, event expects v{version} {}",
                        entry.current.version(),
                        entry.current.state().as_str(),
                        from.as_str()
                    ));
                }
                entry.current.set_state(*to);
            }
            (AuditAction::JustificationComposed, Some(Payload::Justification { record })) => {
                if self.justifications.contains_key(&record.id) {
                    return Err(format!("justification {} already exists", record.id));
                }
                if record.status != Status::Proposed {
                    return Err("composed record is not proposed".into());
                }
                self.justifications.insert(record.id.clone(), (**record).clone());
            }
            (AuditAction::Gate { decision }, Some(Payload::Justification { record })) => {
                let prior = self
                    .justifications
                    .get(&record.id)
                    .ok_or(format!("no justification {}", record.id))?;
                let expected = match decision {
                    GateDecision::Approved => Status::Approved,
                    GateDecision::Rejected => Status::Rejected,
                    GateDecision::Recorded => Status::Recorded,
                };
                let consistent = prior.status == Status::Proposed
                    && record.status == expected
                    && record.decision.as_ref().map(|d| d.audit_sequence) == Some(a.sequence)
                    && prior.same_composition(record);
                if !consistent {
                    return Err(format!("gate event does not follow from justification {}", record.id));
                }
                self.justifications.insert(record.id.clone(), (**record).clone());
            }
            (action, _) => return Err(format!("unexpected payload for {action:?}")),
        }
        Ok(())
    }

    /// Registers an empty model at version 1 in Draft.
    pub fn create_model(
        &mut self,
        actor: &Principal,
        id: Option<ModelId>,
        name: &str,
        source: SourceRef,
    ) -> Result<&KnowledgeModel, EngineError> {
        require_role(actor, &[Role::Contributor])?;
        let id = id.unwrap_or_else(|| ModelId::from_name(name));
        let model = KnowledgeModel::create_with_id(id, name, source)?;
        self.register(actor, model, AuditAction::ModelCreated, "model created".into())
    }

    /// Registers an imported model. It enters Draft whatever state it was
    /// exported in.
    pub fn import_model(
        &mut self,
        actor: &Principal,
        model: KnowledgeModel,
        note: &str,
    ) -> Result<&KnowledgeModel, EngineError> {
        require_role(actor, &[Role::Contributor])?;
        let mut parts = model.into_parts();
        parts.state = WorkflowState::Draft;
        let model = KnowledgeModel::from_parts(parts);
        let note = if note.trim().is_empty() { "model imported" } else { note.trim() };
        self.register(actor, model, AuditAction::ModelImported, note.to_owned())
    }

    fn register(
        &mut self,
        actor: &Principal,
        model: KnowledgeModel,
        action: AuditAction,
        note: String,
    ) -> Result<&KnowledgeModel, EngineError> {
        if self.models.contains_key(model.id()) {
            return Err(EngineError::ModelExists(model.id().clone()));
        }
        let id = model.id().clone();
        let subject = model_subject(&model);
        self.append(
            actor,
            action,
            subject,
            note,
            Some(Payload::Model {
                model: model.into_parts(),
            }),
        );
        Ok(self.model(&id).expect("registered"))
    }

    /// Commits one mutation. Contributors edit; reviewers may correct.
    pub fn mutate(
        &mut self,
        actor: &Principal,
        id: &ModelId,
        mutation: Mutation,
        note: &str,
    ) -> Result<&KnowledgeModel, EngineError> {
        require_role(actor, &[Role::Contributor, Role::Reviewer])?;
        let next = self.current(id)?.apply(&mutation)?;
        let action = match mutation {
            Mutation::Fork => AuditAction::ModelForked,
            ref m => AuditAction::ModelMutated {
                op: op_name(m).to_owned(),
            },
        };
        let note = if note.trim().is_empty() { op_name(&mutation) } else { note.trim() };
        self.append(
            actor,
            action,
            model_subject(&next),
            note.to_owned(),
            Some(Payload::Mutation { mutation }),
        );
        Ok(self.model(id).expect("present"))
    }

    pub fn transition(
        &mut self,
        actor: &Principal,
        id: &ModelId,
        target: WorkflowState,
        why: &str,
    ) -> Result<&KnowledgeModel, EngineError> {
        let current = self.current(id)?.clone();
        let now = self.clock.now();
        transition(&current, target, actor, why, &mut self.audit, now)?;
        self.commit(None);
        Ok(self.model(id).expect("present"))
    }

    /// Merges two registered models into a new Draft model.
    pub fn merge(
        &mut self,
        actor: &Principal,
        left: &ModelId,
        right: &ModelId,
        resolutions: &[Resolution],
        why: &str,
    ) -> Result<&KnowledgeModel, EngineError> {
        require_role(actor, &[Role::Contributor])?;
        let merged = merge_models(self.current(left)?, self.current(right)?, resolutions)?;
        let action = AuditAction::ModelsMerged {
            parents: vec![left.clone(), right.clone()],
        };
        let why = if why.trim().is_empty() { "models merged" } else { why.trim() };
        self.register(actor, merged, action, why.to_owned())
    }

    /// Composes a justification with the next free id `j-<n>`.
    pub fn compose<G: TextGenerator + ?Sized>(
        &mut self,
        actor: &Principal,
        request: &JustificationRequest,
        generator: &G,
    ) -> Result<&JustificationRecord, EngineError> {
        require_role(actor, &[Role::Contributor, Role::Operator])?;
        let id = format!("j-{}", self.justifications.len() + 1);
        let record = compose_justification(id.clone(), request, generator, self.clock.now())?;
        self.append(
            actor,
            AuditAction::JustificationComposed,
            Subject::Justification {
                justification: id.clone(),
            },
            format!("composed for intent: {}", record.intent),
            Some(Payload::Justification {
                record: Box::new(record),
            }),
        );
        Ok(self.justification(&id).expect("composed"))
    }

    /// Runs the gate on a stored justification. Pending outcomes change nothing.
    pub fn gate(
        &mut self,
        id: &str,
        verdict: Option<&VerdictInput>,
    ) -> Result<GateOutcome, EngineError> {
        let record = self
            .justification(id)
            .ok_or_else(|| EngineError::UnknownJustification(id.to_owned()))?
            .clone();
        let now = self.clock.now();
        let outcome = gate_decision(&record, verdict, &mut self.audit, now)?;
        if let GateOutcome::Decided(decided) = &outcome {
            self.commit(Some(Payload::Justification {
                record: Box::new(decided.clone()),
            }));
        }
        Ok(outcome)
    }
}
