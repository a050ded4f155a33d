use std::fs;
use std::path::Path;
use std::sync::Arc;

use knowloop::fixtures::{animal_model, outage_generator, outage_request};
use knowloop::justification::{RiskTier, Status, VerdictInput};
use knowloop::knowledge::{EntityClass, ModelId, Mutation};
use knowloop::workflow::{Principal, Role, StepClock, WorkflowState};
use knowloop_gateway::store::{Store, StoreError};

fn clock() -> Arc<StepClock> {
    Arc::new(StepClock::default())
}

fn alice() -> Principal {
    Principal::new("alice", [Role::Contributor])
}

fn session(dir: &Path) -> Store {
    let mut store = Store::open(dir, clock()).unwrap();
    let bob = Principal::new("bob", [Role::Reviewer]);
    let olga = Principal::new("olga", [Role::Operator]);
    let id = ModelId::new("animals");
    store
        .execute(|e| e.import_model(&alice(), animal_model(), "seed").map(|_| ()))
        .unwrap();
    store
        .execute(|e| {
            let class = EntityClass::new("Fish", "Fish").with_definition("Aquatic vertebrate.");
            e.mutate(&alice(), &id, Mutation::AddClass { class }, "").map(|_| ())
        })
        .unwrap();
    store
        .execute(|e| e.transition(&alice(), &id, WorkflowState::InReview, "ready").map(|_| ()))
        .unwrap();
    store
        .execute(|e| e.transition(&bob, &id, WorkflowState::ReadyToPublish, "ok").map(|_| ()))
        .unwrap();
    let generator = outage_generator();
    let j = store
        .execute(|e| {
            e.compose(&olga, &outage_request(RiskTier::High), &generator)
                .map(|r| r.id.clone())
        })
        .unwrap();
    store
        .execute(|e| e.gate(&j, Some(&VerdictInput::approve(olga.clone(), "checked"))))
        .unwrap();
    store
}

#[test]
fn fresh_directory_has_no_models() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path(), clock()).unwrap();
    assert_eq!(store.engine().models().count(), 0);
    assert!(store.engine().events().is_empty());
}

#[test]
fn restart_reproduces_state() {
    let dir = tempfile::tempdir().unwrap();
    let before = session(dir.path());
    let digest = before.engine().state_digest();
    let events = before.engine().events().to_vec();
    drop(before);

    let after = Store::open(dir.path(), clock()).unwrap();
    assert_eq!(after.engine().state_digest(), digest);
    assert_eq!(after.engine().events(), events.as_slice());
    assert!(after.snapshots_checked() >= 2);
    let record = after.engine().justification("j-1").unwrap();
    assert_eq!(record.status, Status::Approved);
}

#[test]
fn failed_command_persists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = session(dir.path());
    let lines = fs::read_to_string(dir.path().join("audit.jsonl")).unwrap().lines().count();
    let err = store
        .execute(|e| {
            e.transition(&alice(), &ModelId::new("animals"), WorkflowState::Published, "skip")
                .map(|_| ())
        })
        .unwrap_err();
    assert_eq!(err.code(), "unauthorized-role");
    let after = fs::read_to_string(dir.path().join("audit.jsonl")).unwrap().lines().count();
    assert_eq!(lines, after);
    assert_eq!(store.engine().events().len(), lines);
}

#[test]
fn gap_in_audit_sequence_refuses_start() {
    let dir = tempfile::tempdir().unwrap();
    drop(session(dir.path()));
    let path = dir.path().join("audit.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().enumerate().filter(|(i, _)| *i != 2).map(|(_, l)| l).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();

    let err = Store::open(dir.path(), clock()).unwrap_err();
    assert!(matches!(err, StoreError::SequenceGap { expected: 3, found: 4 }), "{err}");
    assert!(err.to_string().contains("expected 3, found 4"));
}

#[test]
fn missing_payload_refuses_start() {
    let dir = tempfile::tempdir().unwrap();
    drop(session(dir.path()));
    fs::write(dir.path().join("models.jsonl"), "").unwrap();
    let err = Store::open(dir.path(), clock()).unwrap_err();
    assert_eq!(err.code(), "corrupt-store");
    assert!(err.to_string().contains("event 1"), "{err}");
}

#[test]
fn tampered_snapshot_refuses_start() {
    let dir = tempfile::tempdir().unwrap();
    drop(session(dir.path()));
    let snap = dir.path().join("snapshots/animals/4.json");
    let text = fs::read_to_string(&snap).unwrap();
    fs::write(&snap, text.replace("Habitat", "Biome")).unwrap();
    let err = Store::open(dir.path(), clock()).unwrap_err();
    assert!(matches!(err, StoreError::Snapshot { .. }), "{err}");
}

#[test]
fn orphan_payload_is_discarded() {
    let dir = tempfile::tempdir().unwrap();
    let digest = {
        let store = session(dir.path());
        store.engine().state_digest()
    };
    // A payload whose audit line never made it to disk.
    let models = dir.path().join("models.jsonl");
    let mut text = fs::read_to_string(&models).unwrap();
    text.push_str(r#"{"sequence":99,"payload":"mutation","mutation":{"op":"fork"}}"#);
    text.push('\n');
    fs::write(&models, text).unwrap();

    let mut store = Store::open(dir.path(), clock()).unwrap();
    assert_eq!(store.engine().state_digest(), digest);
    assert!(!fs::read_to_string(&models).unwrap().contains("\"sequence\":99"));
    store
        .execute(|e| {
            let class = EntityClass::new("Reptile", "Reptile");
            e.mutate(&alice(), &ModelId::new("animals"), Mutation::AddClass { class }, "")
                .map(|_| ())
        })
        .unwrap();
    drop(store);
    Store::open(dir.path(), clock()).unwrap();
}

#[test]
fn torn_audit_line_refuses_start() {
    let dir = tempfile::tempdir().unwrap();
    drop(session(dir.path()));
    let path = dir.path().join("audit.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{\"sequence\":7,\"timest");
    fs::write(&path, text).unwrap();
    let err = Store::open(dir.path(), clock()).unwrap_err();
    assert!(matches!(err, StoreError::Corrupt { line: 7, .. }), "{err}");
}
