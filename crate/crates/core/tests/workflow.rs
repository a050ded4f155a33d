mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use knowloop::engine::Engine;
use knowloop::fixtures::animal_model;
use knowloop::knowledge::{
    ClassId, EntityClass, KnowledgeModel, Literal, ModelId, Mutation, Relationship, SourceRef,
    ValueType,
};
use knowloop::workflow::{
    check_constraints, consistency_check, parse_constraints, transition, AuditFilter,
    AuditLog, Constraint, ConstraintError, Fact, FactSet, Finding, Predicate, Principal,
    Role, Selector, Severity, StepClock, WorkflowError, WorkflowState,
};
use proptest::prelude::*;

use WorkflowState::*;

use common::soundness::{enumerate_transitions, fuzz_session, in_state};

fn t0() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 3, 1, 9, 0, 0).unwrap()
}

#[test]
fn exhaustive_state_target_role_enumeration() {
    // 8 role sets contain a given role; 12 contain reviewer or publisher
    assert_eq!(enumerate_transitions(), Ok(8 + 8 + 8 + 8 + 12));
}

#[test]
fn draft_to_published_is_illegal() {
    let mut log = AuditLog::new();
    let everyone = Principal::new("root", Role::ALL);
    let err = transition(&in_state(Draft), Published, &everyone, "rush", &mut log, t0()).unwrap_err();
    assert_eq!(err.code(), "illegal-transition");
    let err = transition(&in_state(Draft), InReview, &everyone, "  ", &mut log, t0()).unwrap_err();
    assert_eq!(err, WorkflowError::EmptyRationale);
    assert!(log.is_empty());
}

#[test]
fn review_requires_consistency_and_publishing_requires_definitions() {
    let undefined = in_state(Draft).add_entity_class(EntityClass::new("Nest", "Nest")).unwrap();
    let report = consistency_check(&undefined);
    assert!(!report.has_errors());
    assert_eq!(report.warnings().count(), 1);

    let mut log = AuditLog::new();
    let alice = Principal::new("alice", [Role::Contributor]);
    let bob = Principal::new("bob", [Role::Reviewer]);
    let in_review = transition(&undefined, InReview, &alice, "draft done", &mut log, t0()).unwrap();
    match transition(&in_review, ReadyToPublish, &bob, "ok", &mut log, t0()) {
        Err(WorkflowError::ConsistencyBlocked(report)) => {
            assert_eq!(
                report.errors().collect::<Vec<_>>(),
                vec![&Finding::MissingDefinition { class: ClassId::new("Nest") }]
            );
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(log.len(), 1);

    let mut parts = animal_model().into_parts();
    parts
        .relationships
        .push(Relationship::between("Animal", "eats", "Plant", SourceRef::document("x")));
    let dangling = KnowledgeModel::from_parts(parts);
    let report = consistency_check(&dangling);
    assert_eq!(report.errors().count(), 1);
    assert!(matches!(
        transition(&dangling, InReview, &alice, "go", &mut log, t0()),
        Err(WorkflowError::ConsistencyBlocked(_))
    ));
    assert!(consistency_check(&in_state(ReadyToPublish)).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dangling_endpoints_match_a_full_scan(
        m in common::model_with(4),
        extra in proptest::collection::vec(("[A-Z][a-z]{0,3}", "[A-Z][a-z]{0,3}", any::<bool>()), 0..6),
    ) {
        let mut parts = m.into_parts();
        for (s, o, literal) in extra {
            let r = if literal {
                Relationship::literal(s.as_str(), "p", Literal::new("1", ValueType::Integer).unwrap(), SourceRef::document("x"))
            } else {
                Relationship::between(s.as_str(), "p", o.as_str(), SourceRef::document("x"))
            };
            parts.relationships.push(r);
        }
        let m = KnowledgeModel::from_parts(parts);
        let ids: Vec<&ClassId> = m.classes().map(|c| &c.id).collect();
        let mut expected = std::collections::BTreeSet::new();
        for r in m.relationships() {
            if !ids.contains(&&r.subject) { expected.insert((&r.subject, &r.predicate, &r.subject)); }
            if let Some(o) = r.object.as_class() {
                if !ids.contains(&o) { expected.insert((&r.subject, &r.predicate, o)); }
            }
        }
        let expected = expected.len();
        let found = consistency_check(&m)
            .errors()
            .filter(|f| matches!(f, Finding::DanglingEndpoint { .. }))
            .count();
        prop_assert_eq!(found, expected);
    }
}

fn container(warehouse: &str, n: usize) -> Fact {
    Fact::new(
        warehouse,
        "stores-chemical-container",
        Literal::new(format!("C{n:03}"), ValueType::String).unwrap(),
    )
}

#[test]
fn chemical_container_limit() {
    let facts: Vec<Fact> = (0..12)
        .map(|i| container(if i % 2 == 0 { "0024" } else { "0025" }, i))
        .collect();
    let limit = Constraint::new(
        "chemical-limit",
        Selector::predicate("stores-chemical-container").subjects(["0024", "0025"]),
        Predicate::MaxCount { limit: 10 },
    );
    let v = check_constraints(&[limit], &FactSet::new(facts)).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].count, 12);
    assert_eq!(v[0].severity, Severity::Error);

    let at_least_zero = Constraint::new("min0", Selector::predicate("any"), Predicate::MinCount { limit: 0 });
    assert!(check_constraints(&[at_least_zero], &FactSet::default()).unwrap().is_empty());

    let err = parse_constraints(r#"[{"id": "c1", "target": {"predicate": "p"}, "predicate": {"kind": "most-likely"}, "severity": "error"}]"#)
        .unwrap_err();
    assert_eq!(err, ConstraintError::UnknownPredicate { id: "c1".into(), kind: "most-likely".into() });
}

/// Naive interpreter for count and type predicates.
fn naive(c: &Constraint, facts: &[Fact]) -> Vec<(Option<String>, usize)> {
    let selected: Vec<&Fact> = facts
        .iter()
        .filter(|f| f.predicate == c.target.predicate)
        .filter(|f| c.target.subjects.as_ref().is_none_or(|s| s.contains(&f.subject)))
        .collect();
    let mut groups: BTreeMap<Option<String>, Vec<&Fact>> = BTreeMap::new();
    if c.target.scope == knowloop::workflow::Scope::PerSubject {
        for s in c.target.subjects.iter().flatten() {
            groups.entry(Some(s.clone())).or_default();
        }
        for f in &selected {
            groups.entry(Some(f.subject.clone())).or_default().push(f);
        }
    } else {
        groups.insert(None, selected);
    }
    groups
        .into_iter()
        .filter(|(_, g)| match &c.predicate {
            Predicate::MaxCount { limit } => g.len() > *limit,
            Predicate::MinCount { limit } => g.len() < *limit,
            Predicate::ValueType { value_type } => g.iter().any(|f| f.value.value_type != *value_type),
            _ => unreachable!(),
        })
        .map(|(s, g)| (s, g.len()))
        .collect()
}

fn arb_constraint(i: usize) -> impl Strategy<Value = Constraint> {
    let predicate = prop_oneof![
        (0usize..5).prop_map(|limit| Predicate::MaxCount { limit }),
        (0usize..5).prop_map(|limit| Predicate::MinCount { limit }),
        common::value_type().prop_map(|value_type| Predicate::ValueType { value_type }),
    ];
    (
        proptest::sample::select(vec!["p", "q"]),
        proptest::option::of(proptest::sample::subsequence(vec!["a", "b", "c"], 1..3)),
        any::<bool>(),
        predicate,
    )
        .prop_map(move |(p, subjects, per_subject, predicate)| {
            let mut target = Selector::predicate(p);
            if let Some(s) = subjects {
                target = target.subjects(s);
            }
            if per_subject {
                target = target.per_subject();
            }
            Constraint::new(format!("c{i}"), target, predicate)
        })
}

proptest! {
    #[test]
    fn constraints_match_naive_interpreter(
        constraints in (arb_constraint(0), arb_constraint(1), arb_constraint(2)),
        facts in proptest::collection::vec(
            (proptest::sample::select(vec!["a", "b", "c", "d"]), proptest::sample::select(vec!["p", "q"]), common::literal()),
            0..12,
        ),
    ) {
        let constraints = vec![constraints.2, constraints.0, constraints.1];
        let facts: Vec<Fact> = facts.into_iter().map(|(s, p, v)| Fact::new(s, p, v)).collect();
        let got = check_constraints(&constraints, &FactSet::new(facts.clone())).unwrap();
        let mut sorted = constraints.clone();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let expected: Vec<(String, Option<String>, usize)> = sorted
            .iter()
            .flat_map(|c| naive(c, &facts).into_iter().map(|(s, n)| (c.id.clone(), s, n)))
            .collect();
        let got: Vec<(String, Option<String>, usize)> =
            got.into_iter().map(|v| (v.constraint, v.subject, v.count)).collect();
        prop_assert_eq!(got, expected);
    }
}

fn engine() -> Engine {
    Engine::new(Arc::new(StepClock::default()))
}

#[test]
fn audit_trail_filters_per_model() {
    let mut e = engine();
    let alice = Principal::new("alice", [Role::Contributor]);
    let bob = Principal::new("bob", [Role::Reviewer]);
    let ids: Vec<ModelId> = (0..5)
        .map(|i| {
            let m = e.create_model(&alice, None, &format!("m{i}"), SourceRef::document("d")).unwrap();
            m.id().clone()
        })
        .collect();
    for round in 0..3 {
        for id in &ids {
            let (who, to) = match round {
                0 => (&alice, InReview),
                1 => (&bob, Draft),
                _ => (&alice, InReview),
            };
            e.transition(who, id, to, "step").unwrap();
        }
    }
    let global = e.trail(&AuditFilter::default());
    assert_eq!(global.len(), 5 + 15);
    for id in &ids {
        let trail = e.trail(&AuditFilter::model(id.clone()));
        let filtered: Vec<_> = global
            .iter()
            .filter(|ev| ev.subject.model_id() == Some(id))
            .cloned()
            .collect();
        assert_eq!(trail, filtered);
        let transitions = trail.iter().filter(|e| e.action.is_transition()).count();
        assert_eq!(transitions, 3);
        assert!(trail.windows(2).all(|w| w[0].sequence < w[1].sequence));
    }
    assert!(engine().trail(&AuditFilter::default()).is_empty());

    let replayed = Engine::replay(e.events().to_vec(), Arc::new(StepClock::default())).unwrap();
    assert_eq!(replayed.state_digest(), e.state_digest());
}

#[test]
fn published_versions_fork_before_editing() {
    let mut e = engine();
    let alice = Principal::new("alice", [Role::Contributor]);
    let bob = Principal::new("bob", [Role::Reviewer]);
    let pat = Principal::new("pat", [Role::Publisher]);
    let id = e.import_model(&alice, animal_model(), "").unwrap().id().clone();
    e.transition(&alice, &id, InReview, "a").unwrap();
    e.transition(&bob, &id, ReadyToPublish, "b").unwrap();
    e.transition(&pat, &id, Published, "c").unwrap();
    let class = EntityClass::new("Fish", "Fish");
    let err = e.mutate(&alice, &id, Mutation::AddClass { class: class.clone() }, "").unwrap_err();
    assert_eq!(err.code(), "invalid-model");
    let forked = e.mutate(&alice, &id, Mutation::Fork, "new edition").unwrap();
    assert_eq!((forked.version(), forked.state()), (5, Draft));
    assert!(e.mutate(&alice, &id, Mutation::AddClass { class }, "").is_ok());
}

#[test]
fn fuzz_session_has_no_unaudited_mutations() {
    let stats = fuzz_session(0x5eed, 10_000).unwrap();
    assert!(
        stats.succeeded > 1000 && stats.failed > 1000 && stats.pending > 0,
        "{stats:?}"
    );
}
