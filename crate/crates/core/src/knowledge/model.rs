use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::ModelError;
use crate::workflow::WorkflowState;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Stable identifier of a knowledge model.
    ModelId
);
string_id!(
    /// Identifier of an entity class, unique within its model.
    ClassId
);

impl ClassId {
    /// The id annotated with a disambiguating context tag, e.g. `longitude[lake-zone-A]`.
    pub fn with_context(&self, tag: &str) -> ClassId {
        ClassId(with_context(&self.0, tag))
    }
}

pub(crate) fn with_context(id: &str, tag: &str) -> String {
    format!("{id}[{tag}]")
}

impl ModelId {
    /// Derives a model id from a human name: lowercase ASCII alphanumerics, every
    /// other run of characters collapsed to a single `-`.
    pub fn from_name(name: &str) -> ModelId {
        let mut slug = String::with_capacity(name.len());
        let mut dash = false;
        for c in name.chars() {
            if c.is_ascii_alphanumeric() {
                slug.push(c.to_ascii_lowercase());
                dash = false;
            } else if !dash && !slug.is_empty() {
                slug.push('-');
                dash = true;
            }
        }
        while slug.ends_with('-') {
            slug.pop();
        }
        if slug.is_empty() {
            slug.push_str("model");
        }
        ModelId(slug)
    }
}

/// Literal value types a property or relationship object may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ValueType {
    #[serde(rename = "string")]
    String,
    #[serde(rename = "integer")]
    Integer,
    #[serde(rename = "floating-point")]
    FloatingPoint,
    #[serde(rename = "boolean")]
    Boolean,
    #[serde(rename = "datetime")]
    DateTime,
}

impl ValueType {
    pub const ALL: [ValueType; 5] = [
        ValueType::String,
        ValueType::Integer,
        ValueType::FloatingPoint,
        ValueType::Boolean,
        ValueType::DateTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::String => "string",
            ValueType::Integer => "integer",
            ValueType::FloatingPoint => "floating-point",
            ValueType::Boolean => "boolean",
            ValueType::DateTime => "datetime",
        }
    }

    /// The XML Schema datatype this value type maps onto.
    pub fn xsd_iri(self) -> &'static str {
        match self {
            ValueType::String => "http://www.w3.org/2001/XMLSchema#string",
            ValueType::Integer => "http://www.w3.org/2001/XMLSchema#integer",
            ValueType::FloatingPoint => "http://www.w3.org/2001/XMLSchema#double",
            ValueType::Boolean => "http://www.w3.org/2001/XMLSchema#boolean",
            ValueType::DateTime => "http://www.w3.org/2001/XMLSchema#dateTime",
        }
    }

    pub fn from_xsd_iri(iri: &str) -> Option<ValueType> {
        ValueType::ALL.into_iter().find(|t| t.xsd_iri() == iri)
    }

    /// Whether `literal` is a well-formed lexical value of this type.
    pub fn accepts(self, literal: &str) -> bool {
        match self {
            ValueType::String => true,
            ValueType::Integer => literal.parse::<i64>().is_ok(),
            ValueType::FloatingPoint => literal.parse::<f64>().is_ok(),
            ValueType::Boolean => matches!(literal, "true" | "false"),
            ValueType::DateTime => chrono::DateTime::parse_from_rfc3339(literal).is_ok(),
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ModelError::UnknownValueType(s.to_owned()))
    }
}

/// A named, typed property of an entity class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Property {
    pub name: String,
    pub value_type: ValueType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
}

impl Property {
    pub fn new(name: impl Into<String>, value_type: ValueType) -> Self {
        Self {
            name: name.into(),
            value_type,
            example: None,
        }
    }

    pub fn with_example(mut self, example: impl Into<String>) -> Self {
        self.example = Some(example.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExemplarKind {
    /// A central member of the class.
    Archetypical,
    /// An edge-case member.
    Atypical,
    /// A near miss that is not a member.
    Exotypical,
}

impl ExemplarKind {
    pub const ALL: [ExemplarKind; 3] = [
        ExemplarKind::Archetypical,
        ExemplarKind::Atypical,
        ExemplarKind::Exotypical,
    ];

    /// Maximum number of exemplars of this kind a class may carry.
    pub fn limit(self) -> usize {
        match self {
            ExemplarKind::Archetypical => 1,
            ExemplarKind::Atypical => 3,
            ExemplarKind::Exotypical => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExemplarKind::Archetypical => "archetypical",
            ExemplarKind::Atypical => "atypical",
            ExemplarKind::Exotypical => "exotypical",
        }
    }
}

impl fmt::Display for ExemplarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExemplarKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExemplarKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::UnknownExemplarKind(s.to_owned()))
    }
}

/// A named individual illustrating a class. Exotypical exemplars are not
/// members; their label names the nearest non-member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Exemplar {
    pub kind: ExemplarKind,
    pub label: String,
    #[serde(default)]
    pub properties: Vec<String>,
    pub rationale: String,
}

impl Exemplar {
    pub fn new(kind: ExemplarKind, label: impl Into<String>, rationale: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
            properties: Vec::new(),
            rationale: rationale.into(),
        }
    }

    pub fn archetypical(label: impl Into<String>, rationale: impl Into<String>) -> Self {
        Self::new(ExemplarKind::Archetypical, label, rationale)
    }

    pub fn atypical(label: impl Into<String>, rationale: impl Into<String>) -> Self {
        Self::new(ExemplarKind::Atypical, label, rationale)
    }

    pub fn exotypical(label: impl Into<String>, rationale: impl Into<String>) -> Self {
        Self::new(ExemplarKind::Exotypical, label, rationale)
    }

    pub fn with_properties<I, S>(mut self, properties: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.properties = properties.into_iter().map(Into::into).collect();
        self
    }

    /// Identity of an exemplar within its class.
    pub fn key(&self) -> (ExemplarKind, &str) {
        (self.kind, &self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EntityClass {
    pub id: ClassId,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
    #[serde(default)]
    pub properties: Vec<Property>,
    #[serde(default)]
    pub exemplars: Vec<Exemplar>,
}

impl EntityClass {
    pub fn new(id: impl Into<ClassId>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            definition: None,
            properties: Vec::new(),
            exemplars: Vec::new(),
        }
    }

    pub fn with_definition(mut self, definition: impl Into<String>) -> Self {
        self.definition = Some(definition.into());
        self
    }

    pub fn with_property(mut self, property: Property) -> Self {
        self.properties.push(property);
        self
    }

    pub fn with_exemplar(mut self, exemplar: Exemplar) -> Self {
        self.exemplars.push(exemplar);
        self
    }

    pub fn property(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn exemplars_of(&self, kind: ExemplarKind) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.iter().filter(move |e| e.kind == kind)
    }

    pub fn has_definition(&self) -> bool {
        self.definition
            .as_deref()
            .is_some_and(|d| !d.trim().is_empty())
    }

    /// Sorts properties by name and exemplars by (kind, label). Duplicates are kept
    /// so that consistency checks can still see them.
    pub(crate) fn normalize(&mut self) {
        self.properties
            .sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.cmp(b)));
        self.exemplars.sort();
    }

    /// Checks every per-class invariant.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.as_str().is_empty() {
            return Err(ModelError::EmptyClassId);
        }
        let mut names = BTreeSet::new();
        for p in &self.properties {
            if !names.insert(p.name.as_str()) {
                return Err(ModelError::DuplicateProperty {
                    class: self.id.clone(),
                    property: p.name.clone(),
                });
            }
            if let Some(example) = &p.example {
                if !p.value_type.accepts(example) {
                    return Err(ModelError::MalformedLiteral {
                        value: example.clone(),
                        value_type: p.value_type,
                    });
                }
            }
        }
        let mut keys = BTreeSet::new();
        for e in &self.exemplars {
            if e.rationale.trim().is_empty() {
                return Err(ModelError::MissingRationale {
                    class: self.id.clone(),
                    exemplar: e.label.clone(),
                });
            }
            if !keys.insert(e.key()) {
                return Err(ModelError::DuplicateExemplar {
                    class: self.id.clone(),
                    exemplar: e.label.clone(),
                });
            }
        }
        for kind in ExemplarKind::ALL {
            let count = self.exemplars_of(kind).count();
            if count > kind.limit() {
                return Err(ModelError::ExemplarCardinality {
                    class: self.id.clone(),
                    kind,
                    count,
                });
            }
        }
        Ok(())
    }
}

/// Where a piece of knowledge came from, written `kind:locator` (e.g. `doc:src1`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceRef {
    pub kind: String,
    pub locator: String,
}

impl SourceRef {
    pub fn new(kind: impl Into<String>, locator: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            locator: locator.into(),
        }
    }

    pub fn document(locator: impl Into<String>) -> Self {
        Self::new("doc", locator)
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.locator)
    }
}

impl FromStr for SourceRef {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((kind, locator)) if !kind.is_empty() => Ok(SourceRef::new(kind, locator)),
            _ => Err(ModelError::MalformedSourceRef(s.to_owned())),
        }
    }
}

impl Serialize for SourceRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SourceRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Literal {
    pub value: String,
    pub value_type: ValueType,
}

impl Literal {
    pub fn new(value: impl Into<String>, value_type: ValueType) -> Result<Self, ModelError> {
        let value = value.into();
        if !value_type.accepts(&value) {
            return Err(ModelError::MalformedLiteral { value, value_type });
        }
        Ok(Self { value, value_type })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationObject {
    Class(ClassId),
    Literal(Literal),
}

impl RelationObject {
    pub fn as_class(&self) -> Option<&ClassId> {
        match self {
            RelationObject::Class(id) => Some(id),
            RelationObject::Literal(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Relationship {
    pub subject: ClassId,
    pub predicate: String,
    pub object: RelationObject,
    pub provenance: SourceRef,
}

impl Relationship {
    pub fn between(
        subject: impl Into<ClassId>,
        predicate: impl Into<String>,
        object: impl Into<ClassId>,
        provenance: SourceRef,
    ) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: RelationObject::Class(object.into()),
            provenance,
        }
    }

    pub fn literal(
        subject: impl Into<ClassId>,
        predicate: impl Into<String>,
        literal: Literal,
        provenance: SourceRef,
    ) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: RelationObject::Literal(literal),
            provenance,
        }
    }

    /// Relationships sharing a key describe the same (subject, predicate) slot.
    pub fn key(&self) -> (&ClassId, &str) {
        (&self.subject, &self.predicate)
    }
}

/// A reference to the model version a merged model was derived from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ParentRef {
    pub model: ModelId,
    pub version: u64,
    pub content_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Provenance {
    #[serde(default)]
    pub sources: BTreeSet<SourceRef>,
    #[serde(default)]
    pub parents: BTreeSet<ParentRef>,
}

/// Every field of a [`KnowledgeModel`], for importers and for constructing models
/// that deliberately violate invariants (consistency checks exist to catch those).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelParts {
    pub id: ModelId,
    pub name: String,
    pub version: u64,
    pub state: WorkflowState,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default)]
    pub classes: Vec<EntityClass>,
    #[serde(default)]
    pub relationships: Vec<Relationship>,
}

/// A versioned graph of entity classes and relationships.
///
/// Models are values: every operation takes a model and returns a new one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeModel {
    id: ModelId,
    name: String,
    version: u64,
    state: WorkflowState,
    provenance: Provenance,
    classes: BTreeMap<ClassId, EntityClass>,
    relationships: BTreeSet<Relationship>,
}

#[derive(Serialize)]
struct Canonical<'a> {
    id: &'a ModelId,
    name: &'a str,
    provenance: &'a Provenance,
    classes: Vec<&'a EntityClass>,
    relationships: &'a BTreeSet<Relationship>,
}

impl KnowledgeModel {
    /// An empty model at version 1 in Draft; its id is derived from the name.
    pub fn create(name: &str, source: SourceRef) -> Result<Self, ModelError> {
        Self::create_with_id(ModelId::from_name(name), name, source)
    }

    pub fn create_with_id(id: ModelId, name: &str, source: SourceRef) -> Result<Self, ModelError> {
        if name.trim().is_empty() {
            return Err(ModelError::EmptyName);
        }
        if id.as_str().is_empty() {
            return Err(ModelError::EmptyModelId);
        }
        Ok(Self {
            id,
            name: name.to_owned(),
            version: 1,
            state: WorkflowState::Draft,
            provenance: Provenance {
                sources: BTreeSet::from([source]),
                parents: BTreeSet::new(),
            },
            classes: BTreeMap::new(),
            relationships: BTreeSet::new(),
        })
    }

    /// Assembles a model without checking invariants. Classes sharing an id are
    /// collapsed (last wins); use the importers when collisions must be reported.
    pub fn from_parts(parts: ModelParts) -> Self {
        let classes = parts
            .classes
            .into_iter()
            .map(|mut c| {
                c.normalize();
                (c.id.clone(), c)
            })
            .collect();
        Self {
            id: parts.id,
            name: parts.name,
            version: parts.version,
            state: parts.state,
            provenance: parts.provenance,
            classes,
            relationships: parts.relationships.into_iter().collect(),
        }
    }

    pub fn into_parts(self) -> ModelParts {
        ModelParts {
            id: self.id,
            name: self.name,
            version: self.version,
            state: self.state,
            provenance: self.provenance,
            classes: self.classes.into_values().collect(),
            relationships: self.relationships.into_iter().collect(),
        }
    }

    pub fn to_parts(&self) -> ModelParts {
        self.clone().into_parts()
    }

    pub fn id(&self) -> &ModelId {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn state(&self) -> WorkflowState {
        self.state
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn classes(&self) -> impl ExactSizeIterator<Item = &EntityClass> {
        self.classes.values()
    }

    pub fn class(&self, id: &ClassId) -> Option<&EntityClass> {
        self.classes.get(id)
    }

    pub fn contains_class(&self, id: &ClassId) -> bool {
        self.classes.contains_key(id)
    }

    pub fn relationships(&self) -> impl ExactSizeIterator<Item = &Relationship> {
        self.relationships.iter()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.relationships.is_empty()
    }

    /// Reference to this exact version, as recorded in a derived model's provenance.
    pub fn parent_ref(&self) -> ParentRef {
        ParentRef {
            model: self.id.clone(),
            version: self.version,
            content_hash: self.content_hash(),
        }
    }

    /// Canonical UTF-8 serialization: compact JSON, object keys sorted, classes and
    /// relationships sorted by id. Version and workflow state are not content.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let canonical = Canonical {
            id: &self.id,
            name: &self.name,
            provenance: &self.provenance,
            classes: self.classes.values().collect(),
            relationships: &self.relationships,
        };
        // Going through Value sorts every object's keys.
        let value = serde_json::to_value(&canonical).expect("model serializes");
        serde_json::to_vec(&value).expect("value serializes")
    }

    /// Hex SHA-256 digest of [`canonical_bytes`](Self::canonical_bytes).
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    /// Same classes and relationships, ignoring identity, name, provenance and version.
    pub fn same_content(&self, other: &KnowledgeModel) -> bool {
        self.classes == other.classes && self.relationships == other.relationships
    }

    pub(crate) fn set_state(&mut self, state: WorkflowState) {
        self.state = state;
    }

    pub(crate) fn classes_mut(&mut self) -> &mut BTreeMap<ClassId, EntityClass> {
        &mut self.classes
    }

    pub(crate) fn relationships_mut(&mut self) -> &mut BTreeSet<Relationship> {
        &mut self.relationships
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }
}
