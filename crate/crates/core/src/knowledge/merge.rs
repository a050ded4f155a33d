use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::conflict::{detect_conflicts, Conflict, ConflictKind, Locator};
use super::model::{
    with_context, ClassId, EntityClass, Exemplar, ExemplarKind, KnowledgeModel, ModelId,
    ModelParts, Property, Provenance, RelationObject, ValueType,
};
use super::ModelError;
use crate::workflow::WorkflowState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum Strategy {
    /// Keep both variants, suffixing each id with its context tag.
    RetainAndClarify {
        left_tag: String,
        right_tag: String,
    },
    ResolveLeft,
    ResolveRight,
    ResolveCustom {
        value: String,
    },
}

impl Strategy {
    fn mirrored(&self) -> Strategy {
        match self {
            Strategy::RetainAndClarify {
                left_tag,
                right_tag,
            } => Strategy::RetainAndClarify {
                left_tag: right_tag.clone(),
                right_tag: left_tag.clone(),
            },
            Strategy::ResolveLeft => Strategy::ResolveRight,
            Strategy::ResolveRight => Strategy::ResolveLeft,
            Strategy::ResolveCustom { value } => Strategy::ResolveCustom {
                value: value.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Resolution {
    /// Index into the [`ConflictReport`](super::ConflictReport) of the two inputs.
    pub conflict: usize,
    #[serde(flatten)]
    pub strategy: Strategy,
    pub rationale: String,
}

impl Resolution {
    pub fn new(conflict: usize, strategy: Strategy, rationale: impl Into<String>) -> Self {
        Self {
            conflict,
            strategy,
            rationale: rationale.into(),
        }
    }

    pub fn retain_and_clarify(
        conflict: usize,
        left_tag: impl Into<String>,
        right_tag: impl Into<String>,
        rationale: impl Into<String>,
    ) -> Self {
        Self::new(
            conflict,
            Strategy::RetainAndClarify {
                left_tag: left_tag.into(),
                right_tag: right_tag.into(),
            },
            rationale,
        )
    }

    /// The equivalent resolution for the merge with its inputs swapped.
    pub fn mirrored(&self) -> Resolution {
        Resolution {
            conflict: self.conflict,
            strategy: self.strategy.mirrored(),
            rationale: self.rationale.clone(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MergeError {
    #[error("{} conflict(s) have no resolution: {}", .0.len(), render(.0))]
    UncoveredConflicts(Vec<Conflict>),
    #[error("resolution refers to conflict {index} but only {count} were detected")]
    ResolutionOutOfRange { index: usize, count: usize },
    #[error("conflict {0} is resolved more than once")]
    DuplicateResolution(usize),
    #[error("conflict {index} cannot be resolved that way: {reason}")]
    UnsupportedResolution { index: usize, reason: String },
    #[error("class {0} must be retained and clarified with the same tags by every class-level resolution")]
    InconsistentSplit(ClassId),
    #[error("merged model is invalid: {0}")]
    Invalid(#[from] ModelError),
}

fn render(conflicts: &[Conflict]) -> String {
    conflicts
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

struct Plan<'a> {
    decisions: BTreeMap<(&'a Locator, ConflictKind), &'a Strategy>,
}

impl<'a> Plan<'a> {
    fn new(conflicts: &'a [Conflict], resolutions: &'a [Resolution]) -> Result<Self, MergeError> {
        let mut by_index: BTreeMap<usize, &Resolution> = BTreeMap::new();
        for r in resolutions {
            if r.conflict >= conflicts.len() {
                return Err(MergeError::ResolutionOutOfRange {
                    index: r.conflict,
                    count: conflicts.len(),
                });
            }
            if by_index.insert(r.conflict, r).is_some() {
                return Err(MergeError::DuplicateResolution(r.conflict));
            }
        }
        let uncovered: Vec<Conflict> = conflicts
            .iter()
            .enumerate()
            .filter(|(i, _)| !by_index.contains_key(i))
            .map(|(_, c)| c.clone())
            .collect();
        if !uncovered.is_empty() {
            return Err(MergeError::UncoveredConflicts(uncovered));
        }
        let mut decisions = BTreeMap::new();
        for (index, resolution) in by_index {
            let conflict = &conflicts[index];
            check_strategy(index, conflict, &resolution.strategy)?;
            decisions.insert((&conflict.left, conflict.kind), &resolution.strategy);
        }
        Ok(Self { decisions })
    }

    fn get(&self, locator: &Locator, kind: ConflictKind) -> Option<&'a Strategy> {
        self.decisions.get(&(locator, kind)).copied()
    }

    fn any(&self, locator: &Locator) -> Option<&'a Strategy> {
        [
            ConflictKind::TypeMismatch,
            ConflictKind::DuplicateId,
            ConflictKind::DefinitionClash,
            ConflictKind::PredicateClash,
        ]
        .into_iter()
        .find_map(|k| self.get(locator, k))
    }

    /// Context tags when a class-level conflict is retained and clarified.
    fn class_split(&self, class: &ClassId) -> Result<Option<(&'a str, &'a str)>, MergeError> {
        let locator = Locator::Class {
            class: class.clone(),
        };
        let strategies: Vec<&Strategy> = [ConflictKind::DuplicateId, ConflictKind::DefinitionClash]
            .into_iter()
            .filter_map(|k| self.get(&locator, k))
            .collect();
        let tags: BTreeSet<(&str, &str)> = strategies
            .iter()
            .filter_map(|s| match s {
                Strategy::RetainAndClarify {
                    left_tag,
                    right_tag,
                } => Some((left_tag.as_str(), right_tag.as_str())),
                _ => None,
            })
            .collect();
        let all_retained = strategies
            .iter()
            .all(|s| matches!(s, Strategy::RetainAndClarify { .. }));
        match tags.len() {
            0 => Ok(None),
            1 if all_retained => Ok(tags.into_iter().next()),
            _ => Err(MergeError::InconsistentSplit(class.clone())),
        }
    }
}

fn check_strategy(
    index: usize,
    conflict: &Conflict,
    strategy: &Strategy,
) -> Result<(), MergeError> {
    let unsupported = |reason: &str| {
        Err(MergeError::UnsupportedResolution {
            index,
            reason: reason.to_owned(),
        })
    };
    if let Strategy::RetainAndClarify {
        left_tag,
        right_tag,
    } = strategy
    {
        if left_tag.is_empty() || right_tag.is_empty() || left_tag == right_tag {
            return unsupported("context tags must be non-empty and distinct");
        }
        if matches!(conflict.left, Locator::ExemplarSlot { .. }) {
            return unsupported("keeping both exemplar sets would exceed the kind's limit");
        }
    }
    if let Strategy::ResolveCustom { value } = strategy {
        match (&conflict.left, conflict.kind) {
            (Locator::Class { .. }, _) => {
                if value.trim().is_empty() {
                    return unsupported("custom label or definition must be non-empty");
                }
            }
            (Locator::Property { .. }, ConflictKind::TypeMismatch) => {
                if value.parse::<ValueType>().is_err() {
                    return unsupported("custom value must name a value type");
                }
            }
            (Locator::Property { .. }, _) => {}
            _ => return unsupported("no custom value applies to this element"),
        }
    }
    Ok(())
}

/// Id of the model produced by merging `a` and `b`; symmetric in its arguments.
pub fn merged_id(a: &ModelId, b: &ModelId) -> ModelId {
    match a.cmp(b) {
        std::cmp::Ordering::Equal => a.clone(),
        std::cmp::Ordering::Less => ModelId::new(format!("{a}+{b}")),
        std::cmp::Ordering::Greater => ModelId::new(format!("{b}+{a}")),
    }
}

/// Merges two models under the given resolutions. The result starts a new
/// lineage at version 1 in Draft with both inputs recorded as parents.
pub fn merge_models(
    a: &KnowledgeModel,
    b: &KnowledgeModel,
    resolutions: &[Resolution],
) -> Result<KnowledgeModel, MergeError> {
    let report = detect_conflicts(a, b);
    let plan = Plan::new(&report.conflicts, resolutions)?;

    let ids: BTreeSet<&ClassId> = a.classes().chain(b.classes()).map(|c| &c.id).collect();
    let mut classes = Vec::with_capacity(ids.len());
    let mut split: BTreeMap<ClassId, (String, String)> = BTreeMap::new();
    for id in ids {
        match (a.class(id), b.class(id)) {
            (Some(l), None) => classes.push(l.clone()),
            (None, Some(r)) => classes.push(r.clone()),
            (Some(l), Some(r)) => match plan.class_split(id)? {
                Some((lt, rt)) => {
                    classes.push(renamed(l, lt));
                    classes.push(renamed(r, rt));
                    split.insert(id.clone(), (lt.to_owned(), rt.to_owned()));
                }
                None => classes.push(combine(l, r, &plan)?),
            },
            (None, None) => unreachable!("id came from one of the inputs"),
        }
    }
    for class in &classes {
        class.validate()?;
    }

    let mut relationships = BTreeSet::new();
    for (side, model) in [(Side::Left, a), (Side::Right, b)] {
        for r in model.relationships() {
            let locator = Locator::Relationship {
                subject: r.subject.clone(),
                predicate: r.predicate.clone(),
            };
            let mut r = r.clone();
            match plan.any(&locator) {
                None => {}
                Some(Strategy::ResolveLeft) if side == Side::Right => continue,
                Some(Strategy::ResolveRight) if side == Side::Left => continue,
                Some(Strategy::RetainAndClarify {
                    left_tag,
                    right_tag,
                }) => {
                    let tag = if side == Side::Left {
                        left_tag
                    } else {
                        right_tag
                    };
                    r.predicate = with_context(&r.predicate, tag);
                }
                Some(_) => {}
            }
            let tag_for = |id: &ClassId| {
                split
                    .get(id)
                    .map(|(lt, rt)| id.with_context(if side == Side::Left { lt } else { rt }))
            };
            if let Some(subject) = tag_for(&r.subject) {
                r.subject = subject;
            }
            if let RelationObject::Class(object) = &r.object {
                if let Some(object) = tag_for(object) {
                    r.object = RelationObject::Class(object);
                }
            }
            relationships.insert(r);
        }
    }

    let name = if a.name() == b.name() {
        a.name().to_owned()
    } else {
        let mut names = [a.name(), b.name()];
        names.sort_unstable();
        names.join(" + ")
    };
    let provenance = Provenance {
        sources: a
            .provenance()
            .sources
            .iter()
            .chain(&b.provenance().sources)
            .cloned()
            .collect(),
        parents: BTreeSet::from([a.parent_ref(), b.parent_ref()]),
    };
    Ok(KnowledgeModel::from_parts(ModelParts {
        id: merged_id(a.id(), b.id()),
        name,
        version: 1,
        state: WorkflowState::Draft,
        provenance,
        classes,
        relationships: relationships.into_iter().collect(),
    }))
}

fn renamed(class: &EntityClass, tag: &str) -> EntityClass {
    let mut class = class.clone();
    class.id = class.id.with_context(tag);
    class
}

fn pick<'s, T>(strategy: &Strategy, left: &'s T, right: &'s T) -> &'s T {
    match strategy {
        Strategy::ResolveRight => right,
        _ => left,
    }
}

fn combine(l: &EntityClass, r: &EntityClass, plan: &Plan<'_>) -> Result<EntityClass, MergeError> {
    let class_at = Locator::Class {
        class: l.id.clone(),
    };
    let label = match plan.get(&class_at, ConflictKind::DuplicateId) {
        Some(Strategy::ResolveCustom { value }) => value.clone(),
        Some(s) => pick(s, &l.label, &r.label).clone(),
        None => l.label.clone(),
    };
    let definition = match plan.get(&class_at, ConflictKind::DefinitionClash) {
        Some(Strategy::ResolveCustom { value }) => Some(value.clone()),
        Some(s) => pick(s, &l.definition, &r.definition).clone(),
        None => l.definition.clone().or_else(|| r.definition.clone()),
    };

    let names: BTreeSet<&str> = l
        .properties
        .iter()
        .chain(&r.properties)
        .map(|p| p.name.as_str())
        .collect();
    let mut properties = Vec::new();
    for name in names {
        match (l.property(name), r.property(name)) {
            (Some(p), None) | (None, Some(p)) => properties.push(p.clone()),
            (Some(lp), Some(rp)) => {
                let at = Locator::Property {
                    class: l.id.clone(),
                    property: name.to_owned(),
                };
                match plan.any(&at) {
                    None => {
                        let mut p = lp.clone();
                        p.example = lp.example.clone().or_else(|| rp.example.clone());
                        properties.push(p);
                    }
                    Some(Strategy::RetainAndClarify {
                        left_tag,
                        right_tag,
                    }) => {
                        properties.push(Property {
                            name: with_context(name, left_tag),
                            ..lp.clone()
                        });
                        properties.push(Property {
                            name: with_context(name, right_tag),
                            ..rp.clone()
                        });
                    }
                    Some(Strategy::ResolveCustom { value }) => {
                        if lp.value_type != rp.value_type {
                            let value_type: ValueType = value.parse()?;
                            let example = [&lp.example, &rp.example]
                                .into_iter()
                                .flatten()
                                .filter(|e| value_type.accepts(e))
                                .min()
                                .cloned();
                            properties.push(Property {
                                name: name.to_owned(),
                                value_type,
                                example,
                            });
                        } else {
                            properties.push(Property {
                                example: Some(value.clone()),
                                ..lp.clone()
                            });
                        }
                    }
                    Some(s) => properties.push(pick(s, lp, rp).clone()),
                }
            }
            (None, None) => unreachable!(),
        }
    }

    let mut exemplars = Vec::new();
    for kind in ExemplarKind::ALL {
        let slot = Locator::ExemplarSlot {
            class: l.id.clone(),
            kind,
        };
        match plan.get(&slot, ConflictKind::DuplicateId) {
            Some(Strategy::ResolveLeft) => {
                exemplars.extend(l.exemplars_of(kind).cloned());
                continue;
            }
            Some(Strategy::ResolveRight) => {
                exemplars.extend(r.exemplars_of(kind).cloned());
                continue;
            }
            _ => {}
        }
        let lefts: BTreeMap<&str, &Exemplar> = l
            .exemplars_of(kind)
            .map(|e| (e.label.as_str(), e))
            .collect();
        let rights: BTreeMap<&str, &Exemplar> = r
            .exemplars_of(kind)
            .map(|e| (e.label.as_str(), e))
            .collect();
        let labels: BTreeSet<&str> = lefts.keys().chain(rights.keys()).copied().collect();
        for label in labels {
            match (lefts.get(label), rights.get(label)) {
                (Some(e), None) | (None, Some(e)) => exemplars.push((*e).clone()),
                (Some(le), Some(re)) if le == re => exemplars.push((*le).clone()),
                (Some(le), Some(re)) => {
                    let at = Locator::Exemplar {
                        class: l.id.clone(),
                        kind,
                        label: label.to_owned(),
                    };
                    match plan.get(&at, ConflictKind::DuplicateId) {
                        Some(Strategy::RetainAndClarify {
                            left_tag,
                            right_tag,
                        }) => {
                            exemplars.push(Exemplar {
                                label: with_context(label, left_tag),
                                ..(*le).clone()
                            });
                            exemplars.push(Exemplar {
                                label: with_context(label, right_tag),
                                ..(*re).clone()
                            });
                        }
                        Some(s) => exemplars.push(pick(s, *le, *re).clone()),
                        None => unreachable!("differing exemplars are always reported"),
                    }
                }
                (None, None) => unreachable!(),
            }
        }
    }

    let mut class = EntityClass {
        id: l.id.clone(),
        label,
        definition,
        properties,
        exemplars,
    };
    class.normalize();
    Ok(class)
}
