//! OWL in RDF/XML.
//!
//! Classes become `owl:Class`, definitions `rdfs:comment`, properties
//! `owl:DatatypeProperty` with a domain and an XSD range, exemplars named
//! individuals annotated in the `kl:` namespace, and relationships `owl:Axiom`
//! nodes naming source, property and target. IRIs are `urn:<model>:<class>`
//! with ids percent-encoded outside `[A-Za-z0-9._-]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use quick_xml::escape::escape;
use serde::{Deserialize, Serialize};

use super::xml::{self, Node};
use super::OntologyError;
use crate::knowledge::{
    ClassId, EntityClass, Exemplar, ExemplarKind, KnowledgeModel, Literal, ModelId, ModelParts,
    ParentRef, Property, Provenance, RelationObject, Relationship, SourceRef, ValueType,
};
use crate::workflow::{consistency_check, Finding, WorkflowState};

const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
const OWL: &str = "http://www.w3.org/2002/07/owl#";
const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
/// Namespace of the annotation properties carrying exemplar kinds, rationales
/// and provenance.
pub const KL_NS: &str = "urn:knowloop:vocab#";

const ID_SET: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.');

fn enc(id: &str) -> String {
    utf8_percent_encode(id, ID_SET).to_string()
}

struct Iris {
    base: String,
}

impl Iris {
    fn new(model: &ModelId) -> Self {
        Self {
            base: format!("urn:{}:", enc(model.as_str())),
        }
    }

    fn ontology(&self) -> &str {
        self.base.trim_end_matches(':')
    }

    fn class(&self, id: &ClassId) -> String {
        format!("{}{}", self.base, enc(id.as_str()))
    }

    fn property(&self, class: &ClassId, name: &str) -> String {
        format!("{}/{}", self.class(class), enc(name))
    }

    fn exemplar(&self, class: &ClassId, e: &Exemplar) -> String {
        format!("{}/{}/{}", self.class(class), e.kind, enc(&e.label))
    }

    fn predicate(&self, name: &str) -> String {
        format!("{}rel:{}", self.base, enc(name))
    }

    /// The local part after the model prefix, if `iri` is inside this model.
    fn local<'a>(&self, iri: &'a str) -> Option<&'a str> {
        iri.strip_prefix(&self.base)
    }
}

fn dec(s: &str, offset: u64) -> Result<String, OntologyError> {
    percent_decode_str(s)
        .decode_utf8()
        .map(|c| c.into_owned())
        .map_err(|e| OntologyError::InvalidValue {
            offset,
            message: format!("bad percent-encoding in {s:?}: {e}"),
        })
}

/// Text content escaped for XML. Carriage returns are written as character
/// references so that conforming parsers do not normalise them away.
fn text(s: &str) -> String {
    escape(s).replace('\r', "&#13;")
}

/// Serializes `model` as OWL RDF/XML. Output depends only on the model's content.
pub fn export_rdfxml(model: &KnowledgeModel) -> Result<String, OntologyError> {
    let report = consistency_check(model);
    if let Some(Finding::DanglingEndpoint { missing, .. }) = report
        .errors()
        .find(|f| matches!(f, Finding::DanglingEndpoint { .. }))
    {
        return Err(OntologyError::DanglingReference(missing.clone()));
    }
    let iris = Iris::new(model.id());
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<rdf:RDF xmlns:rdf=\"{RDF}\"\n         xmlns:rdfs=\"{RDFS}\"\n         xmlns:owl=\"{OWL}\"\n         xmlns:kl=\"{KL_NS}\">"
    );

    let _ = writeln!(out, "  <owl:Ontology rdf:about=\"{}\">", text(iris.ontology()));
    let _ = writeln!(out, "    <kl:modelId>{}</kl:modelId>", text(model.id().as_str()));
    let _ = writeln!(out, "    <rdfs:label>{}</rdfs:label>", text(model.name()));
    for source in &model.provenance().sources {
        let _ = writeln!(out, "    <kl:source>{}</kl:source>", text(&source.to_string()));
    }
    for parent in &model.provenance().parents {
        out.push_str("    <kl:derivedFrom rdf:parseType=\"Resource\">\n");
        let _ = writeln!(out, "      <kl:model>{}</kl:model>", text(parent.model.as_str()));
        let _ = writeln!(
            out,
            "      <kl:version rdf:datatype=\"{XSD_INTEGER}\">{}</kl:version>",
            parent.version
        );
        let _ = writeln!(out, "      <kl:contentHash>{}</kl:contentHash>", text(&parent.content_hash));
        out.push_str("    </kl:derivedFrom>\n");
    }
    out.push_str("  </owl:Ontology>\n");

    for class in model.classes() {
        write_class(&mut out, &iris, class);
    }

    let mut predicates: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for r in model.relationships() {
        let entry = predicates.entry(&r.predicate).or_default();
        match r.object {
            RelationObject::Class(_) => entry.0 = true,
            RelationObject::Literal(_) => entry.1 = true,
        }
    }
    for (name, (object, datatype)) in predicates {
        for (used, element) in [(object, "owl:ObjectProperty"), (datatype, "owl:DatatypeProperty")] {
            if used {
                let _ = writeln!(out, "  <{element} rdf:about=\"{}\">", text(&iris.predicate(name)));
                let _ = writeln!(out, "    <rdfs:label>{}</rdfs:label>", text(name));
                let _ = writeln!(out, "  </{element}>");
            }
        }
    }
    for r in model.relationships() {
        out.push_str("  <owl:Axiom>\n");
        let _ = writeln!(
            out,
            "    <owl:annotatedSource rdf:resource=\"{}\"/>",
            text(&iris.class(&r.subject))
        );
        let _ = writeln!(
            out,
            "    <owl:annotatedProperty rdf:resource=\"{}\"/>",
            text(&iris.predicate(&r.predicate))
        );
        match &r.object {
            RelationObject::Class(id) => {
                let _ = writeln!(
                    out,
                    "    <owl:annotatedTarget rdf:resource=\"{}\"/>",
                    text(&iris.class(id))
                );
            }
            RelationObject::Literal(l) => {
                let _ = writeln!(
                    out,
                    "    <owl:annotatedTarget rdf:datatype=\"{}\">{}</owl:annotatedTarget>",
                    l.value_type.xsd_iri(),
                    text(&l.value)
                );
            }
        }
        let _ = writeln!(out, "    <kl:provenance>{}</kl:provenance>", text(&r.provenance.to_string()));
        out.push_str("  </owl:Axiom>\n");
    }
    out.push_str("</rdf:RDF>\n");
    Ok(out)
}

fn write_class(out: &mut String, iris: &Iris, class: &EntityClass) {
    let class_iri = text(&iris.class(&class.id));
    let _ = writeln!(out, "  <owl:Class rdf:about=\"{class_iri}\">");
    let _ = writeln!(out, "    <rdfs:label>{}</rdfs:label>", text(&class.label));
    if let Some(definition) = &class.definition {
        let _ = writeln!(out, "    <rdfs:comment>{}</rdfs:comment>", text(definition));
    }
    out.push_str("  </owl:Class>\n");

    for p in &class.properties {
        let _ = writeln!(
            out,
            "  <owl:DatatypeProperty rdf:about=\"{}\">",
            text(&iris.property(&class.id, &p.name))
        );
        let _ = writeln!(out, "    <rdfs:label>{}</rdfs:label>", text(&p.name));
        let _ = writeln!(out, "    <rdfs:domain rdf:resource=\"{class_iri}\"/>");
        let _ = writeln!(out, "    <rdfs:range rdf:resource=\"{}\"/>", p.value_type.xsd_iri());
        if let Some(example) = &p.example {
            let _ = writeln!(out, "    <kl:example>{}</kl:example>", text(example));
        }
        out.push_str("  </owl:DatatypeProperty>\n");
    }

    for e in &class.exemplars {
        let _ = writeln!(
            out,
            "  <owl:NamedIndividual rdf:about=\"{}\">",
            text(&iris.exemplar(&class.id, e))
        );
        if e.kind == ExemplarKind::Exotypical {
            let _ = writeln!(out, "    <kl:nonMemberOf rdf:resource=\"{class_iri}\"/>");
        } else {
            let _ = writeln!(out, "    <rdf:type rdf:resource=\"{class_iri}\"/>");
        }
        let _ = writeln!(out, "    <rdfs:label>{}</rdfs:label>", text(&e.label));
        let _ = writeln!(out, "    <kl:exemplarOf rdf:resource=\"{class_iri}\"/>");
        let _ = writeln!(out, "    <kl:exemplarKind>{}</kl:exemplarKind>", e.kind);
        let _ = writeln!(out, "    <kl:rationale>{}</kl:rationale>", text(&e.rationale));
        for (i, attribute) in e.properties.iter().enumerate() {
            out.push_str("    <kl:attribute rdf:parseType=\"Resource\">\n");
            let _ = writeln!(
                out,
                "      <kl:position rdf:datatype=\"{XSD_INTEGER}\">{i}</kl:position>"
            );
            let _ = writeln!(out, "      <rdf:value>{}</rdf:value>", text(attribute));
            out.push_str("    </kl:attribute>\n");
        }
        out.push_str("  </owl:NamedIndividual>\n");
    }
}

/// An element the importer does not map and therefore did not use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SkippedConstruct {
    /// Element name as `{namespace}local`.
    pub element: String,
    /// Where it was found, e.g. `class urn:m:Bird` or `document`.
    pub context: String,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imported {
    pub model: KnowledgeModel,
    pub skipped: Vec<SkippedConstruct>,
}

struct Importer {
    iris: Iris,
    skipped: Vec<SkippedConstruct>,
}

fn invalid(node: &Node, message: impl Into<String>) -> OntologyError {
    OntologyError::InvalidValue {
        offset: node.offset,
        message: message.into(),
    }
}

fn resource<'a>(node: &'a Node) -> Result<&'a str, OntologyError> {
    node.attr(RDF, "resource")
        .ok_or_else(|| invalid(node, format!("{} needs rdf:resource", node.name.local)))
}

fn about<'a>(node: &'a Node) -> Result<&'a str, OntologyError> {
    node.attr(RDF, "about")
        .ok_or_else(|| invalid(node, format!("{} needs rdf:about", node.name.local)))
}

impl Importer {
    fn skip(&mut self, node: &Node, context: &str) {
        self.skipped.push(SkippedConstruct {
            element: format!("{{{}}}{}", node.name.ns, node.name.local),
            context: context.to_owned(),
            offset: node.offset,
        });
    }

    fn class_id(&self, node: &Node, iri: &str) -> Result<ClassId, OntologyError> {
        let local = self
            .iris
            .local(iri)
            .filter(|l| !l.contains(['/', ':']))
            .ok_or_else(|| invalid(node, format!("{iri} is not a class of this model")))?;
        Ok(ClassId::new(dec(local, node.offset)?))
    }

    fn predicate(&self, node: &Node, iri: &str) -> Result<String, OntologyError> {
        let local = self
            .iris
            .local(iri)
            .and_then(|l| l.strip_prefix("rel:"))
            .ok_or_else(|| invalid(node, format!("{iri} is not a predicate of this model")))?;
        dec(local, node.offset)
    }
}

fn literal_type(node: &Node) -> Result<ValueType, OntologyError> {
    match node.attr(RDF, "datatype") {
        None => Ok(ValueType::String),
        Some(iri) => ValueType::from_xsd_iri(iri)
            .ok_or_else(|| invalid(node, format!("unsupported datatype {iri}"))),
    }
}

fn literal(node: &Node) -> Result<Literal, OntologyError> {
    Literal::new(node.text.clone(), literal_type(node)?).map_err(|e| invalid(node, e.to_string()))
}

fn integer(node: &Node) -> Result<u64, OntologyError> {
    node.text
        .trim()
        .parse()
        .map_err(|_| invalid(node, format!("{:?} is not an integer", node.text)))
}

/// Parses RDF/XML produced by [`export_rdfxml`] or a compatible tool. The model
/// comes back at version 1 in Draft; every element that was not mapped is
/// listed in [`Imported::skipped`].
pub fn import_rdfxml(doc: &str) -> Result<Imported, OntologyError> {
    let root = xml::parse(doc)?;
    if !root.name.is(RDF, "RDF") {
        return Err(OntologyError::NotRdf(format!(
            "{{{}}}{}",
            root.name.ns, root.name.local
        )));
    }
    let ontology = root
        .children
        .iter()
        .find(|n| n.name.is(OWL, "Ontology"))
        .ok_or(OntologyError::MissingOntology)?;

    let mut id = None;
    let mut name = None;
    let mut provenance = Provenance::default();
    let mut importer = Importer {
        iris: Iris::new(&ModelId::new("")),
        skipped: Vec::new(),
    };
    let mut pending_skips = Vec::new();
    for child in &ontology.children {
        if child.name.is(KL_NS, "modelId") {
            id = Some(ModelId::new(child.text.clone()));
        } else if child.name.is(RDFS, "label") {
            name = Some(child.text.clone());
        } else if child.name.is(KL_NS, "source") {
            let source: SourceRef = child.text.parse().map_err(|e: crate::knowledge::ModelError| {
                invalid(child, e.to_string())
            })?;
            provenance.sources.insert(source);
        } else if child.name.is(KL_NS, "derivedFrom") {
            provenance.parents.insert(parent_ref(child)?);
        } else {
            pending_skips.push(child);
        }
    }
    let id = match id {
        Some(id) => id,
        None => {
            let iri = about(ontology)?;
            let local = iri
                .strip_prefix("urn:")
                .ok_or_else(|| invalid(ontology, format!("ontology IRI {iri} is not a urn")))?;
            ModelId::new(dec(local, ontology.offset)?)
        }
    };
    let name = name.unwrap_or_else(|| id.to_string());
    importer.iris = Iris::new(&id);
    for child in pending_skips {
        importer.skip(child, "ontology header");
    }

    // Classes first so that properties, exemplars and axioms can resolve them.
    let mut classes: BTreeMap<ClassId, EntityClass> = BTreeMap::new();
    for node in root.children.iter().filter(|n| n.name.is(OWL, "Class")) {
        let iri = about(node)?;
        let class_id = importer.class_id(node, iri)?;
        if classes.contains_key(&class_id) {
            return Err(OntologyError::IdCollision { iri: iri.to_owned() });
        }
        let mut class = EntityClass::new(class_id, "");
        for child in &node.children {
            if child.name.is(RDFS, "label") {
                class.label = child.text.clone();
            } else if child.name.is(RDFS, "comment") {
                class.definition = Some(child.text.clone());
            } else {
                importer.skip(child, &format!("class {iri}"));
            }
        }
        classes.insert(class.id.clone(), class);
    }

    // A predicate used with both class and literal objects is declared once per
    // property kind, so collisions are keyed on element and IRI.
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut relationships = Vec::new();
    for node in &root.children {
        let n = &node.name;
        if std::ptr::eq(node, ontology) || n.is(OWL, "Class") {
            continue;
        }
        let declared = matches!(n.local.as_str(), "ObjectProperty" | "DatatypeProperty" | "NamedIndividual")
            && n.ns == OWL;
        if declared && !seen.insert((n.local.as_str(), about(node)?)) {
            return Err(OntologyError::IdCollision {
                iri: about(node)?.to_owned(),
            });
        }
        let is_predicate = node
            .attr(RDF, "about")
            .is_some_and(|iri| importer.predicate(node, iri).is_ok());
        if n.is(OWL, "ObjectProperty") || (n.is(OWL, "DatatypeProperty") && is_predicate) {
            declaration(&mut importer, node)?;
        } else if n.is(OWL, "DatatypeProperty") {
            property(&mut importer, node, &mut classes)?;
        } else if n.is(OWL, "NamedIndividual") {
            exemplar(&mut importer, node, &mut classes)?;
        } else if n.is(OWL, "Axiom") {
            relationships.push(axiom(&mut importer, node, &classes)?);
        } else {
            importer.skip(node, "document");
        }
    }

    let model = KnowledgeModel::from_parts(ModelParts {
        id,
        name,
        version: 1,
        state: WorkflowState::Draft,
        provenance,
        classes: classes.into_values().collect(),
        relationships,
    });
    Ok(Imported {
        model,
        skipped: importer.skipped,
    })
}

fn parent_ref(node: &Node) -> Result<ParentRef, OntologyError> {
    let field = |local: &str| {
        node.children
            .iter()
            .find(|c| c.name.is(KL_NS, local))
            .ok_or_else(|| invalid(node, format!("derivedFrom lacks kl:{local}")))
    };
    Ok(ParentRef {
        model: ModelId::new(field("model")?.text.clone()),
        version: integer(field("version")?)?,
        content_hash: field("contentHash")?.text.clone(),
    })
}

fn declaration(importer: &mut Importer, node: &Node) -> Result<(), OntologyError> {
    let iri = about(node)?;
    importer.predicate(node, iri)?;
    for child in &node.children {
        if !child.name.is(RDFS, "label") {
            importer.skip(child, &format!("predicate {iri}"));
        }
    }
    Ok(())
}

fn property(
    importer: &mut Importer,
    node: &Node,
    classes: &mut BTreeMap<ClassId, EntityClass>,
) -> Result<(), OntologyError> {
    let iri = about(node)?;
    let mut name = None;
    let mut domain = None;
    let mut value_type = None;
    let mut example = None;
    for child in &node.children {
        if child.name.is(RDFS, "label") {
            name = Some(child.text.clone());
        } else if child.name.is(RDFS, "domain") {
            domain = Some(importer.class_id(child, resource(child)?)?);
        } else if child.name.is(RDFS, "range") {
            let range = resource(child)?;
            value_type = Some(
                ValueType::from_xsd_iri(range)
                    .ok_or_else(|| invalid(child, format!("unsupported range {range}")))?,
            );
        } else if child.name.is(KL_NS, "example") {
            example = Some(child.text.clone());
        } else {
            importer.skip(child, &format!("property {iri}"));
        }
    }
    let domain = domain.ok_or_else(|| invalid(node, "datatype property needs rdfs:domain"))?;
    let class = classes
        .get_mut(&domain)
        .ok_or_else(|| OntologyError::DanglingReference(domain.clone()))?;
    let name = name.ok_or_else(|| invalid(node, "datatype property needs rdfs:label"))?;
    class.properties.push(Property {
        name,
        value_type: value_type.unwrap_or(ValueType::String),
        example,
    });
    Ok(())
}

fn exemplar(
    importer: &mut Importer,
    node: &Node,
    classes: &mut BTreeMap<ClassId, EntityClass>,
) -> Result<(), OntologyError> {
    let iri = about(node)?;
    let mut owner = None;
    let mut label = None;
    let mut kind = None;
    let mut rationale = String::new();
    let mut attributes: Vec<(u64, String)> = Vec::new();
    for child in &node.children {
        let n = &child.name;
        if n.is(KL_NS, "exemplarOf") {
            owner = Some(importer.class_id(child, resource(child)?)?);
        } else if n.is(RDF, "type") || n.is(KL_NS, "nonMemberOf") {
            // Membership is implied by the kind; still checked to resolve.
            importer.class_id(child, resource(child)?)?;
        } else if n.is(RDFS, "label") {
            label = Some(child.text.clone());
        } else if n.is(KL_NS, "exemplarKind") {
            kind = Some(
                child
                    .text
                    .parse::<ExemplarKind>()
                    .map_err(|e| invalid(child, e.to_string()))?,
            );
        } else if n.is(KL_NS, "rationale") {
            rationale = child.text.clone();
        } else if n.is(KL_NS, "attribute") {
            let position = child
                .children
                .iter()
                .find(|c| c.name.is(KL_NS, "position"))
                .ok_or_else(|| invalid(child, "attribute lacks kl:position"))?;
            let value = child
                .children
                .iter()
                .find(|c| c.name.is(RDF, "value"))
                .ok_or_else(|| invalid(child, "attribute lacks rdf:value"))?;
            attributes.push((integer(position)?, value.text.clone()));
        } else {
            importer.skip(child, &format!("individual {iri}"));
        }
    }
    let Some(owner) = owner else {
        // Individuals that are not exemplars carry nothing the model can hold.
        importer.skip(node, "document");
        return Ok(());
    };
    let class = classes
        .get_mut(&owner)
        .ok_or_else(|| OntologyError::DanglingReference(owner.clone()))?;
    attributes.sort();
    class.exemplars.push(Exemplar {
        kind: kind.ok_or_else(|| invalid(node, "exemplar needs kl:exemplarKind"))?,
        label: label.ok_or_else(|| invalid(node, "exemplar needs rdfs:label"))?,
        properties: attributes.into_iter().map(|(_, v)| v).collect(),
        rationale,
    });
    Ok(())
}

fn axiom(
    importer: &mut Importer,
    node: &Node,
    classes: &BTreeMap<ClassId, EntityClass>,
) -> Result<Relationship, OntologyError> {
    let mut subject = None;
    let mut predicate = None;
    let mut object = None;
    let mut provenance = None;
    for child in &node.children {
        let n = &child.name;
        if n.is(OWL, "annotatedSource") {
            subject = Some(importer.class_id(child, resource(child)?)?);
        } else if n.is(OWL, "annotatedProperty") {
            predicate = Some(importer.predicate(child, resource(child)?)?);
        } else if n.is(OWL, "annotatedTarget") {
            object = Some(match child.attr(RDF, "resource") {
                Some(iri) => RelationObject::Class(importer.class_id(child, iri)?),
                None => RelationObject::Literal(literal(child)?),
            });
        } else if n.is(KL_NS, "provenance") {
            provenance = Some(
                child
                    .text
                    .parse::<SourceRef>()
                    .map_err(|e| invalid(child, e.to_string()))?,
            );
        } else {
            importer.skip(child, "axiom");
        }
    }
    let relationship = Relationship {
        subject: subject.ok_or_else(|| invalid(node, "axiom needs owl:annotatedSource"))?,
        predicate: predicate.ok_or_else(|| invalid(node, "axiom needs owl:annotatedProperty"))?,
        object: object.ok_or_else(|| invalid(node, "axiom needs owl:annotatedTarget"))?,
        provenance: provenance.ok_or_else(|| invalid(node, "axiom needs kl:provenance"))?,
    };
    for id in std::iter::once(&relationship.subject).chain(relationship.object.as_class()) {
        if !classes.contains_key(id) {
            return Err(OntologyError::DanglingReference(id.clone()));
        }
    }
    Ok(relationship)
}
