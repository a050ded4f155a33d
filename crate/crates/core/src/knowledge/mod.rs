//! In-memory knowledge models: entity classes with exemplars and definitions,
//! relationships, versioning, conflict detection and merge.

mod conflict;
mod merge;
mod model;
mod mutation;

use thiserror::Error;

pub use conflict::{detect_conflicts, Conflict, ConflictKind, ConflictReport, Locator};
pub use merge::{merge_models, merged_id, MergeError, Resolution, Strategy};
pub use model::{
    ClassId, EntityClass, Exemplar, ExemplarKind, KnowledgeModel, Literal, ModelId, ModelParts,
    ParentRef, Property, Provenance, RelationObject, Relationship, SourceRef, ValueType,
};
pub use mutation::{Mutation, MutationLog};

use crate::workflow::WorkflowState;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("model name must not be empty")]
    EmptyName,
    #[error("model id must not be empty")]
    EmptyModelId,
    #[error("class id must not be empty")]
    EmptyClassId,
    #[error("class {0} already exists")]
    DuplicateClass(ClassId),
    #[error("class {0} does not exist")]
    UnknownClass(ClassId),
    #[error("class {class} declares property {property} twice")]
    DuplicateProperty { class: ClassId, property: String },
    #[error("class {class} lists exemplar {exemplar} twice")]
    DuplicateExemplar { class: ClassId, exemplar: String },
    #[error("class {class} has {count} {kind} exemplars, at most {} allowed", .kind.limit())]
    ExemplarCardinality {
        class: ClassId,
        kind: ExemplarKind,
        count: usize,
    },
    #[error("exemplar {exemplar} of class {class} has no rationale")]
    MissingRationale { class: ClassId, exemplar: String },
    #[error("definition of class {0} must not be empty")]
    EmptyDefinition(ClassId),
    #[error("relationship refers to unknown class {0}")]
    DanglingReference(ClassId),
    #[error("relationship already present")]
    DuplicateRelationship,
    #[error("relationship not present")]
    UnknownRelationship,
    #[error("{value:?} is not a valid {value_type} literal")]
    MalformedLiteral {
        value: String,
        value_type: ValueType,
    },
    #[error("unknown value type {0:?}")]
    UnknownValueType(String),
    #[error("unknown exemplar kind {0:?}")]
    UnknownExemplarKind(String),
    #[error("source reference {0:?} is not of the form kind:locator")]
    MalformedSourceRef(String),
    #[error("model {model} version {version} is published; fork a new draft to edit it")]
    PublishedImmutable { model: ModelId, version: u64 },
    #[error("only published models can be forked (model is {0})")]
    ForkRequiresPublished(WorkflowState),
}
