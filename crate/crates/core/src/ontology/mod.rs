//! Exchange formats for knowledge models: OWL in RDF/XML and JSON blueprints.

mod blueprint;
mod rdfxml;
mod xml;

use thiserror::Error;

pub use blueprint::{export_blueprint, import_blueprint, BLUEPRINT_FORMAT_VERSION};
pub use rdfxml::{export_rdfxml, import_rdfxml, Imported, SkippedConstruct, KL_NS};

use crate::knowledge::ClassId;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OntologyError {
    #[error("malformed XML at byte {offset}: {message}")]
    MalformedXml { offset: u64, message: String },
    #[error("root element is {0}, expected rdf:RDF")]
    NotRdf(String),
    #[error("document has no owl:Ontology header")]
    MissingOntology,
    #[error("{iri} is declared more than once")]
    IdCollision { iri: String },
    #[error("reference to unknown class {0}")]
    DanglingReference(ClassId),
    #[error("invalid value at byte {offset}: {message}")]
    InvalidValue { offset: u64, message: String },
    #[error("unsupported blueprint format-version {found} (supported: {BLUEPRINT_FORMAT_VERSION})")]
    UnsupportedVersion { found: String },
    #[error("blueprint schema violation at {path}: {message}")]
    Schema { path: String, message: String },
}

impl OntologyError {
    pub fn code(&self) -> &'static str {
        match self {
            OntologyError::MalformedXml { .. } => "malformed-xml",
            OntologyError::NotRdf(_) | OntologyError::MissingOntology => "not-an-ontology",
            OntologyError::IdCollision { .. } => "id-collision",
            OntologyError::DanglingReference(_) => "dangling-reference",
            OntologyError::InvalidValue { .. } => "invalid-value",
            OntologyError::UnsupportedVersion { .. } => "unsupported-version",
            OntologyError::Schema { .. } => "schema-violation",
        }
    }
}
