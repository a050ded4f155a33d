//! Stored constraints tested against ground facts. Five predicate kinds only;
//! there is no general rule language.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::consistency::Severity;
use crate::knowledge::{Literal, ValueType};

/// One ground fact `(subject, predicate, literal)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Fact {
    pub subject: String,
    pub predicate: String,
    pub value: Literal,
}

impl Fact {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, value: Literal) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactSet {
    pub facts: Vec<Fact>,
}

impl FactSet {
    pub fn new(facts: Vec<Fact>) -> Self {
        Self { facts }
    }
}

impl FromIterator<Fact> for FactSet {
    fn from_iter<T: IntoIterator<Item = Fact>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// How selected facts are grouped before a predicate is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// All selected facts form one group.
    #[default]
    Combined,
    /// One group per subject.
    PerSubject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Selector {
    /// Fact predicate the constraint is about.
    pub predicate: String,
    /// Subjects in scope; absent means every subject.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subjects: Option<BTreeSet<String>>,
    #[serde(default)]
    pub scope: Scope,
}

impl Selector {
    pub fn predicate(predicate: impl Into<String>) -> Self {
        Self {
            predicate: predicate.into(),
            subjects: None,
            scope: Scope::Combined,
        }
    }

    pub fn subjects<I, S>(mut self, subjects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.subjects = Some(subjects.into_iter().map(Into::into).collect());
        self
    }

    pub fn per_subject(mut self) -> Self {
        self.scope = Scope::PerSubject;
        self
    }

    fn selects(&self, fact: &Fact) -> bool {
        fact.predicate == self.predicate
            && self
                .subjects
                .as_ref()
                .is_none_or(|s| s.contains(&fact.subject))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Predicate {
    MaxCount {
        limit: usize,
    },
    MinCount {
        limit: usize,
    },
    ValueRange {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    ValueType {
        value_type: ValueType,
    },
    /// Every selected subject carries at least one fact for the predicate.
    RequiredField,
}

impl Predicate {
    const KINDS: [&'static str; 5] = [
        "max-count",
        "min-count",
        "value-range",
        "value-type",
        "required-field",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Constraint {
    pub id: String,
    pub target: Selector,
    pub predicate: Predicate,
    pub severity: Severity,
}

impl Constraint {
    pub fn new(id: impl Into<String>, target: Selector, predicate: Predicate) -> Self {
        Self {
            id: id.into(),
            target,
            predicate,
            severity: Severity::Error,
        }
    }

    pub fn warning(mut self) -> Self {
        self.severity = Severity::Warning;
        self
    }

    fn validate(&self) -> Result<(), ConstraintError> {
        let malformed = |reason: &str| ConstraintError::Malformed {
            id: self.id.clone(),
            reason: reason.to_owned(),
        };
        if self.id.is_empty() {
            return Err(malformed("id must not be empty"));
        }
        if let Predicate::ValueRange { min, max } = self.predicate {
            if min.is_none() && max.is_none() {
                return Err(malformed("value-range needs min or max"));
            }
            if [min, max].into_iter().flatten().any(f64::is_nan) {
                return Err(malformed("value-range bounds must be numbers"));
            }
            if let (Some(lo), Some(hi)) = (min, max) {
                if lo > hi {
                    return Err(malformed("value-range min exceeds max"));
                }
            }
        }
        if matches!(self.predicate, Predicate::RequiredField) && self.target.subjects.is_none() {
            return Err(malformed("required-field needs an explicit subject list"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Violation {
    pub constraint: String,
    pub severity: Severity,
    /// Subject of the offending group; absent for combined groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    /// Number of selected facts in the group.
    pub count: usize,
    /// Facts that individually break the constraint (range and type checks).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offending: Vec<Fact>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.constraint, self.message)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConstraintError {
    #[error("constraint {id}: unknown predicate {kind:?}")]
    UnknownPredicate { id: String, kind: String },
    #[error("constraint {id}: {reason}")]
    Malformed { id: String, reason: String },
    #[error("constraint document at {path}: {message}")]
    Syntax { path: String, message: String },
}

/// Parses a JSON array of constraints, naming unknown predicate kinds.
pub fn parse_constraints(json: &str) -> Result<Vec<Constraint>, ConstraintError> {
    let raw: Vec<serde_json::Value> =
        serde_json::from_str(json).map_err(|e| ConstraintError::Syntax {
            path: "$".into(),
            message: e.to_string(),
        })?;
    let mut constraints = Vec::with_capacity(raw.len());
    for (i, value) in raw.into_iter().enumerate() {
        let id = value
            .get("id")
            .and_then(|v| v.as_str())
            .unwrap_or_default()
            .to_owned();
        if let Some(kind) = value
            .pointer("/predicate/kind")
            .and_then(|v| v.as_str())
            .filter(|k| !Predicate::KINDS.contains(k))
        {
            return Err(ConstraintError::UnknownPredicate {
                id,
                kind: kind.to_owned(),
            });
        }
        let constraint: Constraint =
            serde_path_to_error::deserialize(value).map_err(|e| ConstraintError::Syntax {
                path: format!("[{i}].{}", e.path()),
                message: e.inner().to_string(),
            })?;
        constraint.validate()?;
        constraints.push(constraint);
    }
    Ok(constraints)
}

/// Evaluates every constraint against `facts`. Violations are ordered by
/// constraint id, then by group subject.
pub fn check_constraints(
    constraints: &[Constraint],
    facts: &FactSet,
) -> Result<Vec<Violation>, ConstraintError> {
    for c in constraints {
        c.validate()?;
    }
    let mut ordered: Vec<&Constraint> = constraints.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    for c in ordered {
        for (subject, group) in groups(&c.target, facts) {
            if let Some(v) = evaluate(c, subject, &group) {
                out.push(v);
            }
        }
    }
    Ok(out)
}

fn groups<'a>(target: &Selector, facts: &'a FactSet) -> Vec<(Option<String>, Vec<&'a Fact>)> {
    let selected: Vec<&Fact> = facts.facts.iter().filter(|f| target.selects(f)).collect();
    match target.scope {
        Scope::Combined => vec![(None, selected)],
        Scope::PerSubject => {
            let mut by_subject: BTreeMap<String, Vec<&Fact>> = BTreeMap::new();
            for s in target.subjects.iter().flatten() {
                by_subject.entry(s.clone()).or_default();
            }
            for f in selected {
                by_subject.entry(f.subject.clone()).or_default().push(f);
            }
            by_subject.into_iter().map(|(s, g)| (Some(s), g)).collect()
        }
    }
}

fn evaluate(c: &Constraint, subject: Option<String>, group: &[&Fact]) -> Option<Violation> {
    let count = group.len();
    let violation = |offending: Vec<Fact>, message: String| Violation {
        constraint: c.id.clone(),
        severity: c.severity,
        subject: subject.clone(),
        count,
        offending,
        message,
    };
    let predicate = &c.target.predicate;
    match &c.predicate {
        Predicate::MaxCount { limit } => (count > *limit).then(|| {
            violation(
                vec![],
                format!("{count} {predicate} facts, at most {limit} allowed"),
            )
        }),
        Predicate::MinCount { limit } => (count < *limit).then(|| {
            violation(
                vec![],
                format!("{count} {predicate} facts, at least {limit} required"),
            )
        }),
        Predicate::ValueRange { min, max } => {
            let outside: Vec<Fact> = group
                .iter()
                .filter(|f| match f.value.value.parse::<f64>() {
                    Ok(x) => min.is_some_and(|lo| x < lo) || max.is_some_and(|hi| x > hi),
                    Err(_) => true,
                })
                .map(|f| (*f).clone())
                .collect();
            (!outside.is_empty()).then(|| {
                let n = outside.len();
                violation(
                    outside,
                    format!("{n} {predicate} value(s) outside the allowed range"),
                )
            })
        }
        Predicate::ValueType { value_type } => {
            let wrong: Vec<Fact> = group
                .iter()
                .filter(|f| f.value.value_type != *value_type)
                .map(|f| (*f).clone())
                .collect();
            (!wrong.is_empty()).then(|| {
                let n = wrong.len();
                violation(
                    wrong,
                    format!("{n} {predicate} value(s) not of type {value_type}"),
                )
            })
        }
        Predicate::RequiredField => {
            let present: BTreeSet<&str> = group.iter().map(|f| f.subject.as_str()).collect();
            let missing: Vec<&str> = c
                .target
                .subjects
                .iter()
                .flatten()
                .map(String::as_str)
                .filter(|s| subject.as_deref().is_none_or(|g| g == *s))
                .filter(|s| !present.contains(s))
                .collect();
            (!missing.is_empty()).then(|| {
                violation(
                    vec![],
                    format!("{} missing for {}", predicate, missing.join(", ")),
                )
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn container(warehouse: &str, n: usize) -> Fact {
        Fact::new(
            warehouse,
            "stores-chemical-container",
            Literal::new(format!("C{n:03}"), ValueType::String).unwrap(),
        )
    }

    #[test]
    fn warehouse_limit_reports_total_count() {
        let facts: FactSet = (0..7)
            .map(|i| container("0024", i))
            .chain((7..12).map(|i| container("0025", i)))
            .collect();
        let limit = Constraint::new(
            "chemical-container-limit",
            Selector::predicate("stores-chemical-container").subjects(["0024", "0025"]),
            Predicate::MaxCount { limit: 10 },
        );
        let v = check_constraints(&[limit], &facts).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].count, 12);
    }

    #[test]
    fn min_count_zero_on_empty_facts() {
        let c = Constraint::new(
            "c",
            Selector::predicate("p"),
            Predicate::MinCount { limit: 0 },
        );
        assert!(check_constraints(&[c], &FactSet::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unknown_predicate_is_malformed() {
        let doc = r#"[{"id":"x","target":{"predicate":"p"},"predicate":{"kind":"regex"},"severity":"error"}]"#;
        assert_eq!(
            parse_constraints(doc),
            Err(ConstraintError::UnknownPredicate {
                id: "x".into(),
                kind: "regex".into()
            })
        );
    }
}
