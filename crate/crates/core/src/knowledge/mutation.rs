//! Committed changes to a model. Each accepted mutation yields exactly one new
//! version; a [`MutationLog`] replayed over version 1 reproduces the model.

use serde::{Deserialize, Serialize};

use super::model::{ClassId, EntityClass, Exemplar, KnowledgeModel, Property, Relationship};
use super::ModelError;
use crate::workflow::WorkflowState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Mutation {
    AddClass {
        class: EntityClass,
    },
    AddRelationship {
        relationship: Relationship,
    },
    RemoveRelationship {
        relationship: Relationship,
    },
    SetDefinition {
        class: ClassId,
        definition: String,
    },
    AddProperty {
        class: ClassId,
        property: Property,
    },
    AddExemplar {
        class: ClassId,
        exemplar: Exemplar,
    },
    /// Starts an editable Draft version from a published one.
    Fork,
}

impl KnowledgeModel {
    /// Adds a class. Fails on a duplicate id or any per-class invariant breach.
    pub fn add_entity_class(&self, class: EntityClass) -> Result<KnowledgeModel, ModelError> {
        self.apply(&Mutation::AddClass { class })
    }

    /// Adds a relationship whose endpoints resolve within this model.
    pub fn add_relationship(
        &self,
        relationship: Relationship,
    ) -> Result<KnowledgeModel, ModelError> {
        self.apply(&Mutation::AddRelationship { relationship })
    }

    /// A Draft copy of a published version at version + 1.
    pub fn fork_draft(&self) -> Result<KnowledgeModel, ModelError> {
        self.apply(&Mutation::Fork)
    }

    /// Commits one mutation, producing the next version.
    pub fn apply(&self, mutation: &Mutation) -> Result<KnowledgeModel, ModelError> {
        match (mutation, self.state()) {
            (Mutation::Fork, WorkflowState::Published) => {}
            (Mutation::Fork, state) => return Err(ModelError::ForkRequiresPublished(state)),
            (_, WorkflowState::Published) => {
                return Err(ModelError::PublishedImmutable {
                    model: self.id().clone(),
                    version: self.version(),
                })
            }
            _ => {}
        }
        let mut next = self.clone();
        next.apply_content(mutation)?;
        next.bump_version();
        Ok(next)
    }

    fn apply_content(&mut self, mutation: &Mutation) -> Result<(), ModelError> {
        match mutation {
            Mutation::AddClass { class } => {
                if self.contains_class(&class.id) {
                    return Err(ModelError::DuplicateClass(class.id.clone()));
                }
                class.validate()?;
                let mut class = class.clone();
                class.normalize();
                self.classes_mut().insert(class.id.clone(), class);
            }
            Mutation::AddRelationship { relationship } => {
                self.check_endpoints(relationship)?;
                if !self.relationships_mut().insert(relationship.clone()) {
                    return Err(ModelError::DuplicateRelationship);
                }
            }
            Mutation::RemoveRelationship { relationship } => {
                if !self.relationships_mut().remove(relationship) {
                    return Err(ModelError::UnknownRelationship);
                }
            }
            Mutation::SetDefinition { class, definition } => {
                if definition.trim().is_empty() {
                    return Err(ModelError::EmptyDefinition(class.clone()));
                }
                self.class_entry(class)?.definition = Some(definition.clone());
            }
            Mutation::AddProperty { class, property } => {
                let entry = self.class_entry(class)?;
                let mut updated = entry.clone();
                updated.properties.push(property.clone());
                updated.validate()?;
                updated.normalize();
                *entry = updated;
            }
            Mutation::AddExemplar { class, exemplar } => {
                let entry = self.class_entry(class)?;
                let mut updated = entry.clone();
                updated.exemplars.push(exemplar.clone());
                updated.validate()?;
                updated.normalize();
                *entry = updated;
            }
            Mutation::Fork => self.set_state(WorkflowState::Draft),
        }
        Ok(())
    }

    fn class_entry(&mut self, id: &ClassId) -> Result<&mut EntityClass, ModelError> {
        self.classes_mut()
            .get_mut(id)
            .ok_or_else(|| ModelError::UnknownClass(id.clone()))
    }

    fn check_endpoints(&self, relationship: &Relationship) -> Result<(), ModelError> {
        if !self.contains_class(&relationship.subject) {
            return Err(ModelError::DanglingReference(relationship.subject.clone()));
        }
        if let Some(object) = relationship.object.as_class() {
            if !self.contains_class(object) {
                return Err(ModelError::DanglingReference(object.clone()));
            }
        }
        Ok(())
    }
}

/// Ordered mutations committed on top of a version-1 model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationLog {
    entries: Vec<Mutation>,
}

impl MutationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mutation: Mutation) {
        self.entries.push(mutation);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mutation> {
        self.entries.iter()
    }

    /// Applies every mutation to `genesis` in order. Workflow state is not part of
    /// the log; replayed models carry whatever state `genesis` had, except that a
    /// fork resets it to Draft.
    pub fn replay(&self, genesis: &KnowledgeModel) -> Result<KnowledgeModel, ModelError> {
        let mut model = genesis.clone();
        for mutation in &self.entries {
            model.apply_content(mutation)?;
            model.bump_version();
        }
        Ok(model)
    }
}

impl FromIterator<Mutation> for MutationLog {
    fn from_iter<T: IntoIterator<Item = Mutation>>(iter: T) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
