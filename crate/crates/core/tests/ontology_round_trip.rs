mod common;

use knowloop::fixtures::animal_model;
use knowloop::knowledge::{EntityClass, Exemplar, KnowledgeModel, SourceRef};
use knowloop::ontology::{
    export_blueprint, export_rdfxml, import_blueprint, import_rdfxml, OntologyError,
};
use knowloop::workflow::WorkflowState;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn blueprint_round_trip_is_lossless(m in common::model()) {
        let doc = export_blueprint(&m);
        let back = import_blueprint(&doc).unwrap();
        prop_assert_eq!(back.content_hash(), m.content_hash());
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(export_blueprint(&back), doc);
    }

    #[test]
    fn rdfxml_round_trip_is_lossless(m in common::model()) {
        let doc = export_rdfxml(&m).unwrap();
        let imported = import_rdfxml(&doc).unwrap();
        prop_assert!(imported.skipped.is_empty(), "{:?}", imported.skipped);
        prop_assert_eq!(imported.model.content_hash(), m.content_hash());
        prop_assert_eq!(imported.model.version(), 1);
        prop_assert_eq!(imported.model.state(), WorkflowState::Draft);
        // fixed point: a second pass reproduces the first byte for byte
        prop_assert_eq!(export_rdfxml(&imported.model).unwrap(), doc);
    }

    #[test]
    fn equal_hash_means_identical_exports(m in common::model(), version in 1u64..9) {
        let mut parts = m.to_parts();
        parts.version = version;
        let twin = KnowledgeModel::from_parts(parts);
        prop_assert_eq!(twin.content_hash(), m.content_hash());
        prop_assert_eq!(export_rdfxml(&twin).unwrap(), export_rdfxml(&m).unwrap());
    }
}

fn bird_model() -> KnowledgeModel {
    KnowledgeModel::create("Birds", SourceRef::document("field-guide"))
        .unwrap()
        .add_entity_class(
            EntityClass::new("Bird", "Bird")
                .with_definition("A feathered, winged, egg-laying vertebrate.")
                .with_exemplar(Exemplar::archetypical(
                    "sparrow",
                    "It flies, has feathers, builds nests in trees, and sings",
                ))
                .with_exemplar(Exemplar::atypical("penguin", "A bird that cannot fly"))
                .with_exemplar(Exemplar::exotypical("bat", "Not a bird: bat")),
        )
        .unwrap()
}

#[test]
fn empty_model_exports_header_only() {
    let m = KnowledgeModel::create("Empty", SourceRef::document("x")).unwrap();
    let doc = export_rdfxml(&m).unwrap();
    assert!(doc.contains("owl:Ontology"));
    assert_eq!(doc.matches("owl:Class").count(), 0);
    assert_eq!(doc.matches("owl:NamedIndividual").count(), 0);
}

#[test]
fn bird_exemplars_become_individuals() {
    let doc = export_rdfxml(&bird_model()).unwrap();
    // opening tags only
    assert_eq!(doc.matches("<owl:Class ").count(), 1);
    assert_eq!(doc.matches("<owl:NamedIndividual ").count(), 3);
    assert!(doc.contains("exotypical"));
    let back = import_rdfxml(&doc).unwrap().model;
    let bird = back.classes().next().unwrap();
    assert_eq!(bird.exemplars.len(), 3);
    assert!(bird
        .exemplars
        .iter()
        .any(|e| e.label == "bat" && e.rationale == "Not a bird: bat"));
}

/// Names of the direct children of the root element, found with a plain
/// tag scan that shares no code with the importer.
fn top_level_elements(doc: &str) -> Vec<String> {
    let mut depth = 0usize;
    let mut out = Vec::new();
    let mut rest = doc;
    while let Some(i) = rest.find('<') {
        rest = &rest[i + 1..];
        let end = rest.find('>').expect("closed tag");
        let tag = &rest[..end];
        rest = &rest[end + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if tag.starts_with('/') {
            depth -= 1;
            continue;
        }
        let name: String = tag.chars().take_while(|c| !c.is_whitespace() && *c != '/').collect();
        if depth == 1 {
            out.push(name);
        }
        if !tag.ends_with('/') {
            depth += 1;
        }
    }
    out
}

#[test]
fn unknown_constructs_are_reported() {
    let mapped = ["owl:Ontology", "owl:Class", "owl:Axiom", "owl:NamedIndividual", "owl:ObjectProperty", "owl:DatatypeProperty"];
    let doc = export_rdfxml(&animal_model()).unwrap();
    let extra = concat!(
        r#"<owl:Restriction><owl:onProperty rdf:resource="urn:animals:livesIn"/></owl:Restriction>"#,
        "\n",
        r#"<owl:AllDisjointClasses rdf:about="urn:animals:disjoint"/>"#,
        "\n",
    );
    let doc = doc.replacen("</rdf:RDF>", &format!("{extra}</rdf:RDF>"), 1);
    let oracle = top_level_elements(&doc)
        .iter()
        .filter(|n| !mapped.contains(&n.as_str()))
        .count();
    let imported = import_rdfxml(&doc).unwrap();
    assert_eq!(oracle, 2);
    assert_eq!(imported.skipped.len(), oracle, "{:#?}", imported.skipped);
    assert_eq!(imported.model.content_hash(), {
        let mut p = animal_model().into_parts();
        p.version = 1;
        KnowledgeModel::from_parts(p).content_hash()
    });
}

#[test]
fn truncated_document_reports_offset() {
    let doc = export_rdfxml(&animal_model()).unwrap();
    let cut = &doc[..doc.len() / 2];
    match import_rdfxml(cut) {
        Err(OntologyError::MalformedXml { offset, .. }) => assert!(offset as usize <= cut.len()),
        other => panic!("expected malformed-xml, got {other:?}"),
    }
}

#[test]
fn unsupported_blueprint_version() {
    let doc = export_blueprint(&animal_model());
    let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
    let mut v = v;
    v["format-version"] = serde_json::json!(99);
    let err = import_blueprint(&v.to_string()).unwrap_err();
    assert_eq!(err.code(), "unsupported-version");
}

#[test]
fn blueprint_schema_errors_name_the_path() {
    let doc = export_blueprint(&animal_model());
    let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
    v["model"]["classes"][1].as_object_mut().unwrap().remove("label");
    match import_blueprint(&v.to_string()).unwrap_err() {
        OntologyError::Schema { path, .. } => assert!(path.contains("classes[1]"), "{path}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn blueprint_is_canonical_text() {
    let doc = export_blueprint(&animal_model());
    assert!(doc.ends_with('\n'));
    let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}
