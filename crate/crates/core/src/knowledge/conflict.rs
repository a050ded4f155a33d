//! Conflict detection between two models that are about to be merged.
//!
//! Only four kinds are reported: differing value types, a shared id naming
//! different things, differing definitions, and a (subject, predicate) slot
//! filled differently. Near-synonyms are left to humans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::{
    ClassId, EntityClass, Exemplar, ExemplarKind, KnowledgeModel, RelationObject, ValueType,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictKind {
    TypeMismatch,
    DuplicateId,
    DefinitionClash,
    PredicateClash,
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictKind::TypeMismatch => "type-mismatch",
            ConflictKind::DuplicateId => "duplicate-id",
            ConflictKind::DefinitionClash => "definition-clash",
            ConflictKind::PredicateClash => "predicate-clash",
        })
    }
}

/// Position of a conflicting element inside a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "kebab-case")]
pub enum Locator {
    Class {
        class: ClassId,
    },
    Property {
        class: ClassId,
        property: String,
    },
    Exemplar {
        class: ClassId,
        kind: ExemplarKind,
        label: String,
    },
    /// All exemplars of one kind; used when the union overflows the kind's limit.
    ExemplarSlot {
        class: ClassId,
        kind: ExemplarKind,
    },
    Relationship {
        subject: ClassId,
        predicate: String,
    },
}

impl Locator {
    pub fn class(&self) -> &ClassId {
        match self {
            Locator::Class { class }
            | Locator::Property { class, .. }
            | Locator::Exemplar { class, .. }
            | Locator::ExemplarSlot { class, .. } => class,
            Locator::Relationship { subject, .. } => subject,
        }
    }
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locator::Class { class } => write!(f, "class:{class}"),
            Locator::Property { class, property } => write!(f, "class:{class}/property:{property}"),
            Locator::Exemplar { class, kind, label } => {
                write!(f, "class:{class}/exemplar:{kind}:{label}")
            }
            Locator::ExemplarSlot { class, kind } => write!(f, "class:{class}/exemplars:{kind}"),
            Locator::Relationship { subject, predicate } => {
                write!(f, "relationship:{subject}/{predicate}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Conflict {
    pub kind: ConflictKind,
    pub left: Locator,
    pub right: Locator,
    pub detail: String,
}

impl Conflict {
    fn at(kind: ConflictKind, locator: Locator, detail: String) -> Self {
        Self {
            kind,
            right: locator.clone(),
            left: locator,
            detail,
        }
    }

    /// The same conflict seen from the other side of the merge.
    pub fn mirrored(&self) -> Conflict {
        Conflict {
            kind: self.kind,
            left: self.right.clone(),
            right: self.left.clone(),
            detail: self.detail.clone(),
        }
    }
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.kind, self.left, self.detail)
    }
}

/// Conflicts between two models, sorted by locator then kind. The order does not
/// depend on which model is passed first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub conflicts: Vec<Conflict>,
}

impl ConflictReport {
    pub fn is_empty(&self) -> bool {
        self.conflicts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.conflicts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Conflict> {
        self.conflicts.iter()
    }
}

/// Finds every element the two models describe incompatibly.
pub fn detect_conflicts(a: &KnowledgeModel, b: &KnowledgeModel) -> ConflictReport {
    let mut conflicts = Vec::new();
    for left in a.classes() {
        if let Some(right) = b.class(&left.id) {
            class_conflicts(left, right, &mut conflicts);
        }
    }
    relationship_conflicts(a, b, &mut conflicts);
    conflicts.sort_by(|x, y| x.left.cmp(&y.left).then(x.kind.cmp(&y.kind)));
    ConflictReport { conflicts }
}

fn pair<T: fmt::Display>(a: T, b: T) -> String {
    // Symmetric rendering keeps the report identical under argument swap.
    let (a, b) = (a.to_string(), b.to_string());
    if a <= b {
        format!("{a:?} vs {b:?}")
    } else {
        format!("{b:?} vs {a:?}")
    }
}

fn class_conflicts(left: &EntityClass, right: &EntityClass, out: &mut Vec<Conflict>) {
    let id = &left.id;
    if left.label != right.label {
        out.push(Conflict::at(
            ConflictKind::DuplicateId,
            Locator::Class { class: id.clone() },
            format!("label {}", pair(&left.label, &right.label)),
        ));
    }
    if let (Some(l), Some(r)) = (&left.definition, &right.definition) {
        if l != r {
            out.push(Conflict::at(
                ConflictKind::DefinitionClash,
                Locator::Class { class: id.clone() },
                format!("definition {}", pair(l, r)),
            ));
        }
    }
    for lp in &left.properties {
        let Some(rp) = right.property(&lp.name) else {
            continue;
        };
        let locator = Locator::Property {
            class: id.clone(),
            property: lp.name.clone(),
        };
        if lp.value_type != rp.value_type {
            out.push(Conflict::at(
                ConflictKind::TypeMismatch,
                locator,
                format!("value type {}", pair(lp.value_type, rp.value_type)),
            ));
        } else if let (Some(le), Some(re)) = (&lp.example, &rp.example) {
            if le != re {
                out.push(Conflict::at(
                    ConflictKind::DefinitionClash,
                    locator,
                    format!("example value {}", pair(le, re)),
                ));
            }
        }
    }
    for kind in ExemplarKind::ALL {
        let lefts: BTreeMap<&str, &Exemplar> = left
            .exemplars_of(kind)
            .map(|e| (e.label.as_str(), e))
            .collect();
        let rights: BTreeMap<&str, &Exemplar> = right
            .exemplars_of(kind)
            .map(|e| (e.label.as_str(), e))
            .collect();
        for (label, le) in &lefts {
            if let Some(re) = rights.get(label) {
                if le != re {
                    out.push(Conflict::at(
                        ConflictKind::DuplicateId,
                        Locator::Exemplar {
                            class: id.clone(),
                            kind,
                            label: (*label).to_owned(),
                        },
                        "same exemplar described differently".to_owned(),
                    ));
                }
            }
        }
        let union: BTreeSet<&str> = lefts.keys().chain(rights.keys()).copied().collect();
        if union.len() > kind.limit() {
            out.push(Conflict::at(
                ConflictKind::DuplicateId,
                Locator::ExemplarSlot {
                    class: id.clone(),
                    kind,
                },
                format!(
                    "{} distinct {kind} exemplars, at most {} allowed",
                    union.len(),
                    kind.limit()
                ),
            ));
        }
    }
}

type SlotKey<'a> = (&'a ClassId, &'a str);

fn slots(model: &KnowledgeModel) -> BTreeMap<SlotKey<'_>, BTreeSet<&RelationObject>> {
    let mut slots: BTreeMap<SlotKey<'_>, BTreeSet<&RelationObject>> = BTreeMap::new();
    for r in model.relationships() {
        slots.entry(r.key()).or_default().insert(&r.object);
    }
    slots
}

fn literal_types<'a>(
    objects: impl Iterator<Item = &'a &'a RelationObject>,
) -> Option<BTreeSet<ValueType>> {
    objects
        .map(|o| match o {
            RelationObject::Literal(l) => Some(l.value_type),
            RelationObject::Class(_) => None,
        })
        .collect()
}

fn relationship_conflicts(a: &KnowledgeModel, b: &KnowledgeModel, out: &mut Vec<Conflict>) {
    let right = slots(b);
    for (key, lefts) in slots(a) {
        let Some(rights) = right.get(&key) else {
            continue;
        };
        if &lefts == rights {
            continue;
        }
        let locator = Locator::Relationship {
            subject: key.0.clone(),
            predicate: key.1.to_owned(),
        };
        let render = |set: &BTreeSet<&RelationObject>| {
            set.iter()
                .map(|o| describe(o))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let kinds = (literal_types(lefts.iter()), literal_types(rights.iter()));
        match kinds {
            (Some(lt), Some(rt)) if lt != rt => out.push(Conflict::at(
                ConflictKind::TypeMismatch,
                locator,
                format!(
                    "literal types {}",
                    pair(
                        lt.iter().map(|t| t.as_str()).collect::<Vec<_>>().join("|"),
                        rt.iter().map(|t| t.as_str()).collect::<Vec<_>>().join("|"),
                    )
                ),
            )),
            _ => out.push(Conflict::at(
                ConflictKind::PredicateClash,
                locator,
                format!("objects {}", pair(render(&lefts), render(rights))),
            )),
        }
    }
}

fn describe(object: &RelationObject) -> String {
    match object {
        RelationObject::Class(id) => id.to_string(),
        RelationObject::Literal(l) => format!("{}^^{}", l.value, l.value_type),
    }
}
