//! Writes a short session to a temporary data directory, reopens it, and
//! shows that replay reproduces the same state.

use std::sync::Arc;

use knowloop::fixtures::animal_model;
use knowloop::knowledge::{EntityClass, ModelId, Mutation};
use knowloop::workflow::{Principal, Role, StepClock, WorkflowState};
use knowloop_gateway::store::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("knowloop-replay-{}", std::process::id()));
    let alice = Principal::new("alice", [Role::Contributor]);
    let id = ModelId::new("animals");

    let digest = {
        let mut store = Store::open(&dir, Arc::new(StepClock::default()))?;
        store.execute(|e| e.import_model(&alice, animal_model(), "seed").map(|_| ()))?;
        store.execute(|e| {
            let class = EntityClass::new("Fish", "Fish").with_definition("Aquatic vertebrate.");
            e.mutate(&alice, &id, Mutation::AddClass { class }, "add fish").map(|_| ())
        })?;
        store.execute(|e| e.transition(&alice, &id, WorkflowState::InReview, "ready").map(|_| ()))?;
        for event in store.engine().events() {
            let a = &event.audit;
            println!("#{} {} {:?} {}", a.sequence, a.actor, a.action, a.subject);
        }
        store.engine().state_digest()
    };

    let reopened = Store::open(&dir, Arc::new(StepClock::default()))?;
    println!(
        "replayed {} events, {} snapshots verified, state equal: {}",
        reopened.engine().events().len(),
        reopened.snapshots_checked(),
        reopened.engine().state_digest() == digest
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
