//! Logical consistency and completeness checks run before review and publication.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::WorkflowState;
use crate::knowledge::{ClassId, ExemplarKind, KnowledgeModel, RelationObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "kebab-case")]
pub enum Finding {
    DanglingEndpoint {
        subject: ClassId,
        predicate: String,
        missing: ClassId,
    },
    DuplicateProperty {
        class: ClassId,
        property: String,
    },
    DuplicateExemplar {
        class: ClassId,
        kind: ExemplarKind,
        label: String,
    },
    MissingDefinition {
        class: ClassId,
    },
    ExemplarCardinality {
        class: ClassId,
        kind: ExemplarKind,
        count: usize,
    },
    MissingRationale {
        class: ClassId,
        kind: ExemplarKind,
        label: String,
    },
    MalformedExample {
        class: ClassId,
        property: String,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DanglingEndpoint {
                subject,
                predicate,
                missing,
            } => write!(f, "{subject} {predicate} refers to missing class {missing}"),
            Finding::DuplicateProperty { class, property } => {
                write!(f, "{class} declares property {property} more than once")
            }
            Finding::DuplicateExemplar { class, kind, label } => {
                write!(f, "{class} lists {kind} exemplar {label} more than once")
            }
            Finding::MissingDefinition { class } => write!(f, "{class} has no definition"),
            Finding::ExemplarCardinality { class, kind, count } => write!(
                f,
                "{class} has {count} {kind} exemplars, at most {} allowed",
                kind.limit()
            ),
            Finding::MissingRationale { class, kind, label } => {
                write!(f, "{kind} exemplar {label} of {class} has no rationale")
            }
            Finding::MalformedExample { class, property } => {
                write!(
                    f,
                    "example of {class}.{property} does not match its value type"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Issue {
    pub severity: Severity,
    #[serde(flatten)]
    pub finding: Finding,
}

/// Findings sorted by severity (errors first), then by finding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub issues: Vec<Issue>,
}

impl CheckReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.of(Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.of(Severity::Warning)
    }

    fn of(&self, severity: Severity) -> impl Iterator<Item = &Finding> {
        self.issues
            .iter()
            .filter(move |i| i.severity == severity)
            .map(|i| &i.finding)
    }
}

/// Checks `model` against the rules for its current state.
pub fn consistency_check(model: &KnowledgeModel) -> CheckReport {
    consistency_check_at(model, model.state())
}

/// Checks `model` as if it were in `state`. Missing definitions are warnings
/// before ready-to-publish and errors from then on.
pub fn consistency_check_at(model: &KnowledgeModel, state: WorkflowState) -> CheckReport {
    let mut issues = Vec::new();
    let mut error = |finding| {
        issues.push(Issue {
            severity: Severity::Error,
            finding,
        })
    };

    for r in model.relationships() {
        let endpoints = std::iter::once(&r.subject).chain(match &r.object {
            RelationObject::Class(id) => Some(id),
            RelationObject::Literal(_) => None,
        });
        for id in endpoints {
            if !model.contains_class(id) {
                error(Finding::DanglingEndpoint {
                    subject: r.subject.clone(),
                    predicate: r.predicate.clone(),
                    missing: id.clone(),
                });
            }
        }
    }

    let mut missing_definitions = Vec::new();
    for class in model.classes() {
        let mut names: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &class.properties {
            *names.entry(&p.name).or_default() += 1;
            if p.example
                .as_deref()
                .is_some_and(|e| !p.value_type.accepts(e))
            {
                error(Finding::MalformedExample {
                    class: class.id.clone(),
                    property: p.name.clone(),
                });
            }
        }
        for (name, n) in names {
            if n > 1 {
                error(Finding::DuplicateProperty {
                    class: class.id.clone(),
                    property: name.to_owned(),
                });
            }
        }
        let mut keys: BTreeMap<(ExemplarKind, &str), usize> = BTreeMap::new();
        for e in &class.exemplars {
            *keys.entry(e.key()).or_default() += 1;
            if e.rationale.trim().is_empty() {
                error(Finding::MissingRationale {
                    class: class.id.clone(),
                    kind: e.kind,
                    label: e.label.clone(),
                });
            }
        }
        for ((kind, label), n) in keys {
            if n > 1 {
                error(Finding::DuplicateExemplar {
                    class: class.id.clone(),
                    kind,
                    label: label.to_owned(),
                });
            }
        }
        for kind in ExemplarKind::ALL {
            let count = class.exemplars_of(kind).count();
            if count > kind.limit() {
                error(Finding::ExemplarCardinality {
                    class: class.id.clone(),
                    kind,
                    count,
                });
            }
        }
        if !class.has_definition() {
            missing_definitions.push(Finding::MissingDefinition {
                class: class.id.clone(),
            });
        }
    }

    let severity = if state >= WorkflowState::ReadyToPublish {
        Severity::Error
    } else {
        Severity::Warning
    };
    issues.extend(
        missing_definitions
            .into_iter()
            .map(|finding| Issue { severity, finding }),
    );
    issues.sort();
    issues.dedup();
    CheckReport { issues }
}
