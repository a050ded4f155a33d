//! Workflow soundness checks shared by the workflow suite and the acceptance
//! runner. Each returns a summary or a description of the first violation.

use std::sync::Arc;

use chrono::{TimeZone, Utc};
use knowloop::engine::Engine;
use knowloop::fixtures::{animal_model, outage_generator, outage_request};
use knowloop::justification::{GateOutcome, RiskTier, VerdictInput};
use knowloop::knowledge::{ClassId, EntityClass, KnowledgeModel, ModelId, Mutation, Relationship, SourceRef};
use knowloop::workflow::{transition, AuditAction, AuditLog, Clock, Principal, Role, StepClock, WorkflowError, WorkflowState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use WorkflowState::*;

/// The documented lifecycle, written out independently of the implementation.
pub fn documented(from: WorkflowState, to: WorkflowState) -> Option<&'static [Role]> {
    const TABLE: [(WorkflowState, WorkflowState, &[Role]); 5] = [
        (Draft, InReview, &[Role::Contributor]),
        (InReview, Draft, &[Role::Reviewer]),
        (InReview, ReadyToPublish, &[Role::Reviewer]),
        (ReadyToPublish, Published, &[Role::Publisher]),
        (ReadyToPublish, InReview, &[Role::Reviewer, Role::Publisher]),
    ];
    TABLE.iter().find(|(f, t, _)| *f == from && *t == to).map(|(_, _, r)| *r)
}

pub fn role_sets() -> Vec<Vec<Role>> {
    (0u8..16)
        .map(|mask| {
            Role::ALL
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, r)| *r)
                .collect()
        })
        .collect()
}

pub fn in_state(state: WorkflowState) -> KnowledgeModel {
    let mut parts = animal_model().into_parts();
    parts.state = state;
    KnowledgeModel::from_parts(parts)
}

/// Tries every (state, target, role subset) and compares with the table.
/// Returns the number of admitted combinations.
pub fn enumerate_transitions() -> Result<usize, String> {
    let now = Utc.with_ymd_and_hms(2025, 3, 1, 9, 0, 0).unwrap();
    let mut admitted = 0;
    for from in WorkflowState::ALL {
        for to in WorkflowState::ALL {
            for roles in role_sets() {
                let actor = Principal::new("p", roles.clone());
                let mut log = AuditLog::new();
                let result = transition(&in_state(from), to, &actor, "because", &mut log, now);
                let case = format!("{from:?} -> {to:?} as {roles:?}");
                match (documented(from, to), result) {
                    (None, Err(WorkflowError::IllegalTransition { .. })) => {}
                    (Some(required), Ok(next)) if roles.iter().any(|r| required.contains(r)) => {
                        if next.state() != to || log.len() != 1 {
                            return Err(format!("{case}: wrong state or audit"));
                        }
                        if log.events()[0].action != (AuditAction::Transition { from, to }) {
                            return Err(format!("{case}: wrong audit action"));
                        }
                        admitted += 1;
                        continue;
                    }
                    (Some(required), Err(WorkflowError::UnauthorizedRole { .. }))
                        if !roles.iter().any(|r| required.contains(r)) => {}
                    (_, other) => return Err(format!("{case}: unexpected {other:?}")),
                }
                if !log.is_empty() {
                    return Err(format!("{case}: refused but audited"));
                }
            }
        }
    }
    Ok(admitted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzStats {
    pub succeeded: usize,
    pub failed: usize,
    pub pending: usize,
    pub events: usize,
}

/// Random commands against the engine. Every command either fails and
/// leaves everything untouched, or changes state and appends exactly one
/// event; replaying the events reproduces the final state and hashes.
pub fn fuzz_session(seed: u64, ops: usize) -> Result<FuzzStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock: Arc<dyn Clock> = Arc::new(StepClock::default());
    let mut e = Engine::new(clock);
    let people: Vec<Principal> = role_sets()
        .into_iter()
        .enumerate()
        .map(|(i, roles)| Principal::new(format!("p{i}"), roles))
        .collect();
    let generator = outage_generator();
    let mut stats = FuzzStats { succeeded: 0, failed: 0, pending: 0, events: 0 };
    let mut transitions = 0usize;
    let mut before = e.state_digest();

    for step in 0..ops {
        let actor = &people[rng.gen_range(0..people.len())];
        let ids: Vec<ModelId> = e.models().map(|m| m.id().clone()).collect();
        let pick = |rng: &mut ChaCha8Rng| -> ModelId {
            if ids.is_empty() || rng.gen_bool(0.02) {
                ModelId::new("ghost")
            } else {
                ids[rng.gen_range(0..ids.len())].clone()
            }
        };
        let before_events = e.events().len();
        let result: Result<bool, String> = match rng.gen_range(0..100) {
            0..=4 => e
                .create_model(actor, None, &format!("model {}", rng.gen_range(0..12)), SourceRef::document("fuzz"))
                .map(|_| true)
                .map_err(|x| x.to_string()),
            5..=39 => {
                let id = pick(&mut rng);
                let class_id = format!("C{}", rng.gen_range(0..15));
                let other = format!("C{}", rng.gen_range(0..15));
                let mutation = match rng.gen_range(0..5) {
                    0 | 1 => Mutation::AddClass {
                        class: EntityClass::new(class_id.as_str(), "x").with_definition("defined"),
                    },
                    2 => Mutation::SetDefinition { class: ClassId::new(class_id), definition: "d".into() },
                    3 => Mutation::AddRelationship {
                        relationship: Relationship::between(class_id.as_str(), "rel", other.as_str(), SourceRef::document("f")),
                    },
                    _ => Mutation::Fork,
                };
                e.mutate(actor, &id, mutation, "").map(|_| true).map_err(|x| x.to_string())
            }
            40..=84 => {
                let id = pick(&mut rng);
                let target = WorkflowState::ALL[rng.gen_range(0..4)];
                let why = if rng.gen_bool(0.05) { "" } else { "fuzz" };
                let r = e.transition(actor, &id, target, why).map(|_| true).map_err(|x| x.to_string());
                if r.is_ok() {
                    transitions += 1;
                }
                r
            }
            85..=89 => {
                let a = pick(&mut rng);
                let b = pick(&mut rng);
                e.merge(actor, &a, &b, &[], "").map(|_| true).map_err(|x| x.to_string())
            }
            90..=94 => {
                let risk = if rng.gen_bool(0.5) { RiskTier::High } else { RiskTier::Low };
                let mut req = outage_request(risk);
                req.seed = rng.gen_range(0..1000);
                e.compose(actor, &req, &generator).map(|_| true).map_err(|x| x.to_string())
            }
            _ => {
                let n = e.justifications().count();
                let id = format!("j-{}", rng.gen_range(0..=n + 1));
                let verdict = match rng.gen_range(0..3) {
                    0 => None,
                    1 => Some(VerdictInput::approve(actor.clone(), "seen")),
                    _ => Some(VerdictInput::reject(actor.clone(), "no")),
                };
                e.gate(&id, verdict.as_ref())
                    .map(|o| !matches!(o, GateOutcome::PendingHuman))
                    .map_err(|x| x.to_string())
            }
        };
        let after = e.state_digest();
        let grew = e.events().len() - before_events;
        match result {
            Ok(true) => {
                stats.succeeded += 1;
                if grew != 1 || after == before {
                    return Err(format!("op {step}: success appended {grew} event(s)"));
                }
            }
            Ok(false) | Err(_) => {
                if matches!(result, Ok(false)) {
                    stats.pending += 1;
                } else {
                    stats.failed += 1;
                }
                if grew != 0 || after != before {
                    return Err(format!("op {step}: unaudited change ({result:?})"));
                }
            }
        }
        before = after;
    }
    stats.events = e.events().len();
    if stats.succeeded != stats.events {
        return Err(format!("{} successes but {} events", stats.succeeded, stats.events));
    }
    let audited = e.events().iter().filter(|ev| ev.audit.action.is_transition()).count();
    if audited != transitions {
        return Err(format!("{transitions} transitions but {audited} audited"));
    }
    let replayed = Engine::replay(e.events().to_vec(), Arc::new(StepClock::default())).map_err(|x| x.to_string())?;
    if replayed.state_digest() != e.state_digest() {
        return Err("replayed state differs".into());
    }
    for m in e.models() {
        let entry = e.entry(m.id()).expect("listed");
        let rebuilt = entry.mutations.replay(&entry.genesis).map_err(|x| x.to_string())?;
        if rebuilt.content_hash() != m.content_hash()
            || replayed.model(m.id()).map(|r| r.content_hash()) != Some(m.content_hash())
        {
            return Err(format!("{}: hash differs after replay", m.id()));
        }
    }
    Ok(stats)
}
