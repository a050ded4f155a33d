use std::sync::Arc;

use knowloop::engine::{Engine, EngineError, Event, Payload};
use knowloop::fixtures::{animal_model, outage_generator, outage_request};
use knowloop::justification::{GateOutcome, RiskTier, Status, VerdictInput};
use knowloop::knowledge::{EntityClass, ModelId, Mutation, SourceRef};
use knowloop::workflow::{AuditAction, Principal, Role, StepClock, WorkflowState};

fn engine() -> Engine {
    Engine::new(Arc::new(StepClock::default()))
}

fn ada() -> Principal {
    Principal::new("ada", [Role::Contributor])
}

fn replay(events: Vec<Event>) -> Result<Engine, EngineError> {
    Engine::replay(events, Arc::new(StepClock::default()))
}

fn seeded() -> Engine {
    let mut e = engine();
    e.import_model(&ada(), animal_model(), "").unwrap();
    e.mutate(&ada(), &ModelId::new("animals"), Mutation::AddClass { class: EntityClass::new("Fish", "Fish") }, "fish").unwrap();
    e.transition(&ada(), &ModelId::new("animals"), WorkflowState::InReview, "ready").unwrap();
    e
}

#[test]
fn roles_are_enforced_per_command() {
    let mut e = engine();
    let olga = Principal::new("olga", [Role::Operator]);
    let err = e.create_model(&olga, None, "Plants", SourceRef::document("d")).unwrap_err();
    assert_eq!(err.code(), "unauthorized-role");
    assert!(e.events().is_empty());
    let m = e.create_model(&ada(), None, "Plants and Trees", SourceRef::document("d")).unwrap();
    assert_eq!((m.version(), m.state()), (1, WorkflowState::Draft));
    let id = m.id().clone();
    assert_eq!(e.create_model(&ada(), Some(id.clone()), "Again", SourceRef::document("d")).unwrap_err().code(), "model-exists");
    assert_eq!(e.mutate(&olga, &id, Mutation::Fork, "").unwrap_err().code(), "unauthorized-role");
    assert_eq!(e.transition(&ada(), &ModelId::new("nope"), WorkflowState::InReview, "x").unwrap_err().code(), "unknown-model");
    assert_eq!(e.gate("j-1", None).unwrap_err().code(), "unknown-justification");
    assert_eq!(e.events().len(), 1);
}

#[test]
fn imports_enter_draft() {
    let mut e = engine();
    let mut parts = animal_model().into_parts();
    parts.state = WorkflowState::Published;
    let m = e.import_model(&ada(), knowloop::knowledge::KnowledgeModel::from_parts(parts), "restore").unwrap();
    assert_eq!(m.state(), WorkflowState::Draft);
    assert_eq!(m.version(), 4);
    assert_eq!(e.audit().events()[0].action, AuditAction::ModelImported);
    assert_eq!(e.audit().events()[0].rationale, "restore");
}

#[test]
fn justification_lifecycle_is_audited() {
    let mut e = engine();
    let olga = Principal::new("olga", [Role::Operator]);
    let req = outage_request(RiskTier::High);
    assert_eq!(e.compose(&olga, &req, &outage_generator()).unwrap().id, "j-1");
    assert_eq!(e.compose(&ada(), &req, &outage_generator()).unwrap().id, "j-2");
    assert_eq!(e.gate("j-1", None).unwrap(), GateOutcome::PendingHuman);
    assert_eq!(e.events().len(), 2);
    let out = e.gate("j-1", Some(&VerdictInput::approve(olga.clone(), "checked"))).unwrap();
    assert!(out.enactment_permitted());
    assert_eq!(e.justification("j-1").unwrap().status, Status::Approved);
    assert_eq!(e.gate("j-1", Some(&VerdictInput::reject(olga, "late"))).unwrap_err().code(), "already-terminal");
    let decided = e.justification("j-1").unwrap();
    assert_eq!(decided.decision.as_ref().unwrap().audit_sequence, 3);

    let again = replay(e.events().to_vec()).unwrap();
    assert_eq!(again.state_digest(), e.state_digest());
}

#[test]
fn replay_reconstructs_models_and_hashes() {
    let e = seeded();
    let again = replay(e.events().to_vec()).unwrap();
    assert_eq!(again.state_digest(), e.state_digest());
    let id = ModelId::new("animals");
    assert_eq!(again.model(&id).unwrap().content_hash(), e.model(&id).unwrap().content_hash());
    assert_eq!(again.model(&id).unwrap().state(), WorkflowState::InReview);
    assert_eq!(again.audit().events(), e.audit().events());
}

#[test]
fn replay_refuses_tampered_histories() {
    let events = seeded().events().to_vec();

    let mut dropped = events.clone();
    dropped.remove(1);
    assert!(matches!(replay(dropped), Err(EngineError::Replay { sequence: 3, .. })));

    let mut reordered = events.clone();
    reordered.swap(1, 2);
    assert!(replay(reordered).is_err());

    let mut wrong_version = events.clone();
    if let Some(Payload::Model { model }) = &mut wrong_version[0].payload {
        model.version = 7;
    }
    let err = replay(wrong_version).unwrap_err();
    assert_eq!(err.code(), "corrupt-store");

    let mut no_payload = events.clone();
    no_payload[1].payload = None;
    assert!(matches!(replay(no_payload), Err(EngineError::Replay { sequence: 2, .. })));

    let mut wrong_from = events;
    wrong_from[2].audit.action = AuditAction::Transition { from: WorkflowState::InReview, to: WorkflowState::Draft };
    assert!(replay(wrong_from).is_err());
}
