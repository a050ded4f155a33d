//! JSON blueprints: `{"format-version": 1, "model": {...}}` with object keys
//! sorted and a trailing newline. The schema ships as
//! `schema/blueprint-v1.schema.json`.

use serde::{Deserialize, Serialize};

use super::OntologyError;
use crate::knowledge::{KnowledgeModel, ModelParts};

pub const BLUEPRINT_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct Blueprint {
    format_version: u64,
    model: ModelParts,
}

/// Serializes the complete model, including version and workflow state.
pub fn export_blueprint(model: &KnowledgeModel) -> String {
    let doc = Blueprint {
        format_version: BLUEPRINT_FORMAT_VERSION,
        model: model.to_parts(),
    };
    // Value maps are ordered, which gives the canonical key order.
    let value = serde_json::to_value(&doc).expect("blueprint serializes");
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

pub fn import_blueprint(doc: &str) -> Result<KnowledgeModel, OntologyError> {
    let value: serde_json::Value = serde_json::from_str(doc).map_err(|e| OntologyError::Schema {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    match value.get("format-version") {
        None => {
            return Err(OntologyError::Schema {
                path: "format-version".into(),
                message: "missing field `format-version`".into(),
            })
        }
        Some(v) if v.as_u64() == Some(BLUEPRINT_FORMAT_VERSION) => {}
        Some(v) => return Err(OntologyError::UnsupportedVersion { found: v.to_string() }),
    }
    let doc: Blueprint = serde_path_to_error::deserialize(value).map_err(|e| OntologyError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    Ok(KnowledgeModel::from_parts(doc.model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::SourceRef;

    #[test]
    fn unsupported_version() {
        let err = import_blueprint(r#"{"format-version": 99, "model": {}}"#).unwrap_err();
        assert_eq!(err, OntologyError::UnsupportedVersion { found: "99".into() });
    }

    #[test]
    fn missing_field_is_path_annotated() {
        let m = KnowledgeModel::create("shipping", SourceRef::document("src1")).unwrap();
        let doc = export_blueprint(&m).replace("\"name\": \"shipping\",", "");
        match import_blueprint(&doc).unwrap_err() {
            OntologyError::Schema { path, message } => {
                assert_eq!(path, "model");
                assert!(message.contains("name"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
