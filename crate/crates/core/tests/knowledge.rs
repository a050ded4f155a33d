mod common;

use std::collections::BTreeSet;

use knowloop::knowledge::{
    detect_conflicts, merge_models, ClassId, ConflictKind, EntityClass, Exemplar, KnowledgeModel,
    Locator, MergeError, ModelError, ModelId, ModelParts, Mutation, MutationLog, Property,
    Relationship, Resolution, SourceRef, Strategy as Merge, ValueType,
};
use knowloop::workflow::WorkflowState;
use proptest::prelude::*;
use proptest::sample::select;
use sha2::{Digest, Sha256};

fn src(s: &str) -> SourceRef {
    s.parse().unwrap()
}

#[test]
fn create_model_starts_empty_in_draft() {
    let m = KnowledgeModel::create("shipping", src("doc:src1")).unwrap();
    assert_eq!(m.version(), 1);
    assert_eq!(m.state(), WorkflowState::Draft);
    assert!(m.is_empty());
    assert!(matches!(
        KnowledgeModel::create("", src("doc:src1")),
        Err(ModelError::EmptyName)
    ));
    assert!(matches!(
        KnowledgeModel::create("  ", src("doc:src1")),
        Err(ModelError::EmptyName)
    ));
}

#[test]
fn empty_models_with_equal_name_and_source_share_a_hash() {
    let a = KnowledgeModel::create("containers", src("interview:A")).unwrap();
    let b = KnowledgeModel::create("containers", src("interview:A")).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    // independent oracle: SHA-256 of the canonical bytes, computed here
    assert_eq!(a.content_hash(), hex::encode(Sha256::digest(a.canonical_bytes())));
    let c = KnowledgeModel::create("containers", src("interview:B")).unwrap();
    assert_ne!(a.content_hash(), c.content_hash());
}

fn bird() -> EntityClass {
    EntityClass::new("Bird", "Bird")
        .with_exemplar(Exemplar::archetypical(
            "sparrow",
            "It flies, has feathers, builds nests in trees, and sings",
        ))
        .with_exemplar(Exemplar::atypical("penguin", "Cannot fly but swims"))
        .with_exemplar(Exemplar::exotypical("bat", "Flies but is a mammal"))
}

#[test]
fn add_entity_class_checks_ids_and_cardinality() {
    let m = KnowledgeModel::create("birds", src("doc:guide")).unwrap();
    let m2 = m.add_entity_class(bird()).unwrap();
    assert_eq!(m2.version(), 2);
    assert_eq!(m2.class(&ClassId::new("Bird")).unwrap().exemplars.len(), 3);
    assert_eq!(m2.name(), m.name());
    assert_eq!(m2.provenance(), m.provenance());

    assert!(matches!(
        m2.add_entity_class(EntityClass::new("Bird", "Another")),
        Err(ModelError::DuplicateClass(_))
    ));

    let mut crowded = EntityClass::new("Fish", "Fish");
    for name in ["eel", "seahorse", "lungfish", "mudskipper"] {
        crowded = crowded.with_exemplar(Exemplar::atypical(name, "unusual"));
    }
    assert!(matches!(
        m.add_entity_class(crowded),
        Err(ModelError::ExemplarCardinality { count: 4, .. })
    ));
    let two_arch = EntityClass::new("Fish", "Fish")
        .with_exemplar(Exemplar::archetypical("trout", "typical"))
        .with_exemplar(Exemplar::archetypical("salmon", "typical"));
    assert!(m.add_entity_class(two_arch).is_err());
    let no_reason = EntityClass::new("Fish", "Fish").with_exemplar(Exemplar::exotypical("whale", " "));
    assert!(matches!(
        m.add_entity_class(no_reason),
        Err(ModelError::MissingRationale { .. })
    ));
}

#[test]
fn relationships_must_resolve() {
    let m = KnowledgeModel::create("birds", src("doc:guide"))
        .unwrap()
        .add_entity_class(bird())
        .unwrap();
    let dangling = Relationship::between("Bird", "builds", "Nest", src("doc:guide"));
    assert!(matches!(m.add_relationship(dangling), Err(ModelError::DanglingReference(_))));
}

#[test]
fn published_models_are_immutable_until_forked() {
    let mut parts = KnowledgeModel::create("birds", src("doc:g")).unwrap().into_parts();
    parts.state = WorkflowState::Published;
    let published = KnowledgeModel::from_parts(parts);
    assert!(matches!(
        published.add_entity_class(bird()),
        Err(ModelError::PublishedImmutable { .. })
    ));
    let draft = published.fork_draft().unwrap();
    assert_eq!(draft.state(), WorkflowState::Draft);
    assert_eq!(draft.version(), 2);
    assert!(draft.add_entity_class(bird()).is_ok());
}

fn geo(class: &str, lon: ValueType) -> KnowledgeModel {
    KnowledgeModel::create("lakes", src("doc:survey"))
        .unwrap()
        .add_entity_class(EntityClass::new(class, class).with_property(Property::new("longitude", lon)))
        .unwrap()
}

#[test]
fn longitude_type_mismatch_is_one_conflict() {
    let a = geo("Lake", ValueType::String);
    let b = geo("Lake", ValueType::FloatingPoint);
    let report = detect_conflicts(&a, &b);
    assert_eq!(report.len(), 1);
    assert_eq!(report.conflicts[0].kind, ConflictKind::TypeMismatch);
    assert!(detect_conflicts(&a, &a).is_empty());
}

#[test]
fn retain_and_clarify_keeps_both_longitudes() {
    let a = geo("Lake", ValueType::String);
    let mut b = geo("Lake", ValueType::FloatingPoint).into_parts();
    b.id = ModelId::new("lakes-b");
    let b = KnowledgeModel::from_parts(b);
    let err = merge_models(&a, &b, &[]).unwrap_err();
    assert!(matches!(err, MergeError::UncoveredConflicts(ref c) if c.len() == 1));

    let r = Resolution::retain_and_clarify(0, "lake-zone-A", "lake-zone-B", "both are in use");
    let merged = merge_models(&a, &b, &[r]).unwrap();
    let lake = merged.class(&ClassId::new("Lake")).unwrap();
    let props: Vec<(&str, ValueType)> =
        lake.properties.iter().map(|p| (p.name.as_str(), p.value_type)).collect();
    assert_eq!(
        props,
        vec![
            ("longitude[lake-zone-A]", ValueType::String),
            ("longitude[lake-zone-B]", ValueType::FloatingPoint)
        ]
    );
    assert_eq!(merged.version(), 1);
    assert_eq!(merged.state(), WorkflowState::Draft);
    assert_eq!(merged.provenance().parents.len(), 2);

    assert!(matches!(
        merge_models(&a, &b, &[Resolution::new(3, Merge::ResolveLeft, "x")]),
        Err(MergeError::ResolutionOutOfRange { index: 3, count: 1 })
    ));
}

#[test]
fn merging_with_an_empty_model_is_identity() {
    let m = knowloop::fixtures::animal_model();
    let empty = KnowledgeModel::from_parts(ModelParts {
        id: ModelId::new("empty"),
        name: m.name().to_owned(),
        version: 1,
        state: WorkflowState::Draft,
        provenance: Default::default(),
        classes: vec![],
        relationships: vec![],
    });
    let merged = merge_models(&m, &empty, &[]).unwrap();
    assert_eq!(common::class_map(&merged), common::class_map(&m));
    assert_eq!(
        merged.relationships().collect::<Vec<_>>(),
        m.relationships().collect::<Vec<_>>()
    );
}

const NAMES: [&str; 3] = ["latitude", "longitude", "depth"];

/// Models drawn from a small pool of class ids and property names so that
/// overlaps are frequent. Labels are fixed; only value types vary.
fn typed_model(id: &'static str) -> impl Strategy<Value = KnowledgeModel> {
    let class = proptest::collection::vec(proptest::option::of(common::value_type()), 3);
    proptest::collection::btree_map(select(vec!["A", "B", "C", "D", "E"]), class, 0..5).prop_map(
        move |classes| {
            let classes = classes
                .into_iter()
                .map(|(cid, types)| {
                    let mut c = EntityClass::new(cid, cid);
                    for (name, t) in NAMES.iter().zip(types) {
                        if let Some(t) = t {
                            c = c.with_property(Property::new(*name, t));
                        }
                    }
                    c
                })
                .collect();
            KnowledgeModel::from_parts(ModelParts {
                id: ModelId::new(id),
                name: id.to_owned(),
                version: 1,
                state: WorkflowState::Draft,
                provenance: Default::default(),
                classes,
                relationships: vec![],
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conflicts_match_pairwise_scan(a in typed_model("a"), b in typed_model("b")) {
        let mut oracle = Vec::new();
        for ca in a.classes() {
            for cb in b.classes() {
                if ca.id != cb.id { continue; }
                for pa in &ca.properties {
                    for pb in &cb.properties {
                        if pa.name == pb.name && pa.value_type != pb.value_type {
                            oracle.push((ConflictKind::TypeMismatch, Locator::Property {
                                class: ca.id.clone(),
                                property: pa.name.clone(),
                            }));
                        }
                    }
                }
            }
        }
        oracle.sort();
        let report = detect_conflicts(&a, &b);
        let got: Vec<_> = report.iter().map(|c| (c.kind, c.left.clone())).collect();
        prop_assert_eq!(&got, &oracle);
        // order of arguments does not change the report's content
        let swapped: Vec<_> = detect_conflicts(&b, &a).iter().map(|c| (c.kind, c.left.clone())).collect();
        prop_assert_eq!(&swapped, &oracle);
    }

    #[test]
    fn merged_class_count_is_the_id_union(a in typed_model("a"), b in typed_model("b")) {
        let report = detect_conflicts(&a, &b);
        let resolutions: Vec<Resolution> = (0..report.len())
            .map(|i| Resolution::new(i, Merge::ResolveLeft, "left wins"))
            .collect();
        let merged = merge_models(&a, &b, &resolutions).unwrap();
        let ids: BTreeSet<&ClassId> = a.classes().chain(b.classes()).map(|c| &c.id).collect();
        prop_assert_eq!(merged.class_count(), ids.len());
    }

    #[test]
    fn merge_commutes_with_mirrored_resolutions(a in typed_model("a"), b in typed_model("b"), right in any::<bool>()) {
        let report = detect_conflicts(&a, &b);
        let resolutions: Vec<Resolution> = (0..report.len())
            .map(|i| if right && i % 2 == 0 {
                Resolution::retain_and_clarify(i, "left", "right", "keep")
            } else {
                Resolution::new(i, Merge::ResolveRight, "right wins")
            })
            .collect();
        let mirrored: Vec<Resolution> = resolutions.iter().map(Resolution::mirrored).collect();
        let ab = merge_models(&a, &b, &resolutions).unwrap();
        let ba = merge_models(&b, &a, &mirrored).unwrap();
        prop_assert_eq!(ab.content_hash(), ba.content_hash());
    }

    #[test]
    fn conflict_free_merge_is_the_union(a in common::model_with(3), b in common::model_with(3)) {
        prop_assume!(detect_conflicts(&a, &b).is_empty());
        let merged = merge_models(&a, &b, &[]).unwrap();
        for c in a.classes().chain(b.classes()) {
            let m = merged.class(&c.id).unwrap();
            for p in &c.properties {
                prop_assert!(m.property(&p.name).is_some());
            }
            for e in &c.exemplars {
                prop_assert!(m.exemplars.iter().any(|x| x.key() == e.key()));
            }
        }
        for r in a.relationships().chain(b.relationships()) {
            prop_assert!(merged.relationships().any(|x| x == r));
        }
    }

    #[test]
    fn replaying_mutations_reproduces_the_model(ops in proptest::collection::vec((0u8..4, common::ident(), common::text()), 1..40)) {
        let mut model = KnowledgeModel::create("replay", SourceRef::document("x")).unwrap();
        let genesis = model.clone();
        let mut log = MutationLog::new();
        for (op, id, text) in ops {
            let ids: Vec<ClassId> = model.classes().map(|c| c.id.clone()).collect();
            let mutation = match (op, ids.first()) {
                (0, _) | (_, None) => Mutation::AddClass { class: EntityClass::new(id.as_str(), text.as_str()) },
                (1, Some(c)) => Mutation::SetDefinition { class: c.clone(), definition: text },
                (2, Some(c)) => Mutation::AddProperty { class: c.clone(), property: Property::new(id, ValueType::String) },
                (_, Some(c)) => Mutation::AddRelationship {
                    relationship: Relationship::between(c.clone(), id, ids[ids.len() - 1].clone(), SourceRef::document("x")),
                },
            };
            if let Ok(next) = model.apply(&mutation) {
                prop_assert_eq!(next.version(), model.version() + 1);
                for c in next.classes() {
                    for kind in knowloop::knowledge::ExemplarKind::ALL {
                        prop_assert!(c.exemplars_of(kind).count() <= kind.limit());
                    }
                }
                log.push(mutation);
                model = next;
            }
        }
        let replayed = log.replay(&genesis).unwrap();
        prop_assert_eq!(replayed.content_hash(), model.content_hash());
        prop_assert_eq!(replayed.version(), genesis.version() + log.len() as u64);
    }

    #[test]
    fn hash_tracks_canonical_bytes(a in common::model_with(3), b in common::model_with(3)) {
        prop_assert_eq!(a.canonical_bytes() == b.canonical_bytes(), a.content_hash() == b.content_hash());
    }
}
