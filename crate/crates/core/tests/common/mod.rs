//! Shared generators for property tests.
#![allow(dead_code)]

pub mod reference;
pub mod flaky;
pub mod gate;
pub mod soundness;

use std::collections::{BTreeMap, BTreeSet};

use knowloop::knowledge::{
    ClassId, EntityClass, Exemplar, ExemplarKind, KnowledgeModel, Literal, ModelId, ModelParts,
    ParentRef, Property, Provenance, RelationObject, Relationship, SourceRef, ValueType,
};
use knowloop::workflow::WorkflowState;
use proptest::collection::{btree_map, btree_set, vec};
use proptest::prelude::*;
use proptest::sample::select;

/// Free text including XML-significant and non-ASCII characters.
pub fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9.,;:!?()<>&\"'/#%éüß€漢-][a-zA-Z0-9 .,;:!?()<>&\"'/#%éüß€漢-]{0,23}"
}

pub fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,7}"
}

pub fn value_type() -> impl Strategy<Value = ValueType> {
    select(ValueType::ALL.to_vec())
}

pub fn state() -> impl Strategy<Value = WorkflowState> {
    select(WorkflowState::ALL.to_vec())
}

pub fn literal_of(vt: ValueType) -> BoxedStrategy<String> {
    match vt {
        ValueType::String => text().boxed(),
        ValueType::Integer => any::<i64>().prop_map(|i| i.to_string()).boxed(),
        ValueType::FloatingPoint => (-1.0e9f64..1.0e9).prop_map(|f| f.to_string()).boxed(),
        ValueType::Boolean => any::<bool>().prop_map(|b| b.to_string()).boxed(),
        ValueType::DateTime => (2000u32..2030, 1u32..13, 1u32..29, 0u32..24)
            .prop_map(|(y, m, d, h)| format!("{y}-{m:02}-{d:02}T{h:02}:15:00Z"))
            .boxed(),
    }
}

pub fn literal() -> impl Strategy<Value = Literal> {
    value_type().prop_flat_map(|vt| literal_of(vt).prop_map(move |v| Literal::new(v, vt).unwrap()))
}

pub fn property() -> impl Strategy<Value = Property> {
    (ident(), value_type()).prop_flat_map(|(name, vt)| {
        proptest::option::of(literal_of(vt)).prop_map(move |example| Property {
            name: name.clone(),
            value_type: vt,
            example,
        })
    })
}

pub fn exemplars() -> impl Strategy<Value = Vec<Exemplar>> {
    let one = |kind: ExemplarKind, max: usize| {
        btree_map(text(), (text(), vec(text(), 0..3)), 0..=max).prop_map(move |m| {
            m.into_iter()
                .map(|(label, (rationale, props))| {
                    Exemplar::new(kind, label, rationale).with_properties(props)
                })
                .collect::<Vec<_>>()
        })
    };
    (
        one(ExemplarKind::Archetypical, 1),
        one(ExemplarKind::Atypical, 3),
        one(ExemplarKind::Exotypical, 1),
    )
        .prop_map(|(a, b, c)| a.into_iter().chain(b).chain(c).collect())
}

pub fn class(id: String) -> impl Strategy<Value = EntityClass> {
    (
        text(),
        proptest::option::of(text()),
        vec(property(), 0..4),
        exemplars(),
    )
        .prop_map(move |(label, definition, props, exemplars)| {
            let mut seen = BTreeSet::new();
            let properties = props
                .into_iter()
                .filter(|p| seen.insert(p.name.clone()))
                .collect();
            EntityClass {
                id: ClassId::new(id.clone()),
                label,
                definition,
                properties,
                exemplars,
            }
        })
}

pub fn source() -> impl Strategy<Value = SourceRef> {
    ("[a-z]{1,6}", "[a-zA-Z0-9/._:-]{1,12}").prop_map(|(k, l)| SourceRef::new(k, l))
}

pub fn parent() -> impl Strategy<Value = ParentRef> {
    ("[a-z][a-z0-9-]{0,6}", 1u64..20, "[0-9a-f]{64}").prop_map(|(m, v, h)| ParentRef {
        model: ModelId::new(m),
        version: v,
        content_hash: h,
    })
}

fn relationship(ids: Vec<String>) -> impl Strategy<Value = Relationship> {
    let object = prop_oneof![
        select(ids.clone()).prop_map(|id| RelationObject::Class(ClassId::new(id))),
        literal().prop_map(RelationObject::Literal),
    ];
    (select(ids), ident(), object, source()).prop_map(|(subject, predicate, object, provenance)| {
        Relationship {
            subject: ClassId::new(subject),
            predicate,
            object,
            provenance,
        }
    })
}

/// Valid models of up to `max_classes` classes.
pub fn model_with(max_classes: usize) -> impl Strategy<Value = KnowledgeModel> {
    let ids = btree_set(ident(), 0..=max_classes);
    (
        "[a-z][a-z0-9-]{0,10}",
        text(),
        1u64..50,
        state(),
        btree_set(source(), 0..3),
        btree_set(parent(), 0..2),
        ids,
    )
        .prop_flat_map(|(id, name, version, state, sources, parents, ids)| {
            let ids: Vec<String> = ids.into_iter().collect();
            let classes: Vec<BoxedStrategy<EntityClass>> =
                ids.iter().map(|i| class(i.clone()).boxed()).collect();
            let rels = if ids.is_empty() {
                Just(Vec::new()).boxed()
            } else {
                vec(relationship(ids.clone()), 0..6).boxed()
            };
            (classes, rels).prop_map(move |(classes, relationships)| {
                KnowledgeModel::from_parts(ModelParts {
                    id: ModelId::new(id.clone()),
                    name: name.clone(),
                    version,
                    state,
                    provenance: Provenance {
                        sources: sources.clone(),
                        parents: parents.clone(),
                    },
                    classes,
                    relationships,
                })
            })
        })
}

pub fn model() -> impl Strategy<Value = KnowledgeModel> {
    model_with(5)
}

/// Every class id paired with every element it holds, for set comparisons.
pub fn class_map(m: &KnowledgeModel) -> BTreeMap<ClassId, EntityClass> {
    m.classes().map(|c| (c.id.clone(), c.clone())).collect()
}
