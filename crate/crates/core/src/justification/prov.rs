//! Provenance export shaped after the W3C PROV JSON serialization: entities,
//! activities and agents plus `used`, `wasGeneratedBy`, `wasAssociatedWith`
//! and `wasInformedBy` relations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::record::{JustificationRecord, Status};
use super::ProvError;
use crate::ontology::KL_NS;

pub type Attributes = BTreeMap<String, Value>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvDocument {
    pub prefix: BTreeMap<String, String>,
    pub entity: BTreeMap<String, Attributes>,
    pub activity: BTreeMap<String, Attributes>,
    pub agent: BTreeMap<String, Attributes>,
    pub used: BTreeMap<String, Attributes>,
    #[serde(rename = "wasGeneratedBy")]
    pub was_generated_by: BTreeMap<String, Attributes>,
    #[serde(rename = "wasAssociatedWith")]
    pub was_associated_with: BTreeMap<String, Attributes>,
    #[serde(rename = "wasInformedBy")]
    pub was_informed_by: BTreeMap<String, Attributes>,
}

impl ProvDocument {
    /// Ids of entities used by `activity`.
    pub fn used_by(&self, activity: &str) -> Vec<&str> {
        self.used
            .values()
            .filter(|r| r.get("prov:activity").and_then(Value::as_str) == Some(activity))
            .filter_map(|r| r.get("prov:entity").and_then(Value::as_str))
            .collect()
    }

    pub fn agents_of(&self, activity: &str) -> Vec<&str> {
        self.was_associated_with
            .values()
            .filter(|r| r.get("prov:activity").and_then(Value::as_str) == Some(activity))
            .filter_map(|r| r.get("prov:agent").and_then(Value::as_str))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("prov document serializes");
        out.push('\n');
        out
    }
}

fn attrs<const N: usize>(pairs: [(&str, Value); N]) -> Attributes {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
}

fn relation(map: &mut BTreeMap<String, Attributes>, prefix: &str, body: Attributes) {
    let key = format!("_:{prefix}{}", map.len() + 1);
    map.insert(key, body);
}

pub fn decision_activity(id: &str) -> String {
    format!("kl:decision/{id}")
}

/// Exports a terminal record. The decision activity uses every ground; an
/// enactment activity exists only for approved or recorded records.
pub fn export_provenance(record: &JustificationRecord) -> Result<ProvDocument, ProvError> {
    let decision = match (&record.decision, record.status) {
        (Some(d), status) if status.is_terminal() => d,
        _ => {
            return Err(ProvError::NotTerminal {
                id: record.id.clone(),
                status: record.status,
            })
        }
    };
    let mut doc = ProvDocument::default();
    doc.prefix
        .insert("prov".into(), "http://www.w3.org/ns/prov#".into());
    doc.prefix.insert("kl".into(), KL_NS.into());

    let id = &record.id;
    let compose = format!("kl:composition/{id}");
    let decide = decision_activity(id);
    let claim = format!("kl:claim/{id}");
    let justification = format!("kl:justification/{id}");
    let requester = format!("kl:agent/{}", record.created_by);
    let generator = format!("kl:generator/{}", record.generator);

    for item in &record.evidence {
        doc.entity.insert(
            format!("kl:evidence/{}", item.id),
            attrs([
                ("prov:type", json!("kl:Evidence")),
                ("prov:label", json!(item.statement)),
                ("kl:source", json!(item.source.to_string())),
                ("kl:confidence", json!(item.confidence)),
            ]),
        );
        if item.source.kind == "model" {
            doc.entity.insert(
                format!("kl:model/{}", item.source.locator),
                attrs([("prov:type", json!("kl:KnowledgeModel"))]),
            );
        }
    }
    doc.entity.insert(
        claim.clone(),
        attrs([
            ("prov:type", json!("kl:Claim")),
            ("prov:label", json!(record.claim)),
        ]),
    );
    doc.entity.insert(
        justification.clone(),
        attrs([
            ("prov:type", json!("kl:Justification")),
            ("kl:status", json!(record.status.as_str())),
            ("kl:risk", json!(record.risk)),
            ("kl:warrant", json!(record.warrant)),
        ]),
    );

    doc.agent.insert(
        requester.clone(),
        attrs([("prov:type", json!("prov:SoftwareAgent"))]),
    );
    doc.agent.insert(
        generator.clone(),
        attrs([
            ("prov:type", json!("prov:SoftwareAgent")),
            ("kl:version", json!(record.generator.version)),
        ]),
    );
    let decider = if decision.human {
        let principal = format!("kl:principal/{}", decision.actor);
        doc.agent
            .insert(principal.clone(), attrs([("prov:type", json!("prov:Person"))]));
        principal
    } else {
        requester.clone()
    };

    doc.activity.insert(
        compose.clone(),
        attrs([
            ("prov:type", json!("kl:Composition")),
            ("prov:startTime", json!(record.created_at.to_rfc3339())),
            ("kl:templateVersion", json!(record.template_version)),
        ]),
    );
    doc.activity.insert(
        decide.clone(),
        attrs([
            ("prov:type", json!(match decision.outcome {
                crate::workflow::GateDecision::Approved => "kl:Approval",
                crate::workflow::GateDecision::Rejected => "kl:Rejection",
                crate::workflow::GateDecision::Recorded => "kl:Recording",
            })),
            ("prov:startTime", json!(decision.at.to_rfc3339())),
            ("kl:rationale", json!(decision.rationale)),
            ("kl:auditSequence", json!(decision.audit_sequence)),
        ]),
    );

    for entity in [&claim, &justification] {
        relation(
            &mut doc.was_generated_by,
            "gen",
            attrs([
                ("prov:entity", json!(entity)),
                ("prov:activity", json!(compose)),
            ]),
        );
    }
    for ground in &record.grounds {
        relation(
            &mut doc.used,
            "used",
            attrs([
                ("prov:activity", json!(decide)),
                ("prov:entity", json!(format!("kl:evidence/{ground}"))),
            ]),
        );
    }
    for (activity, agent) in [
        (&compose, &requester),
        (&compose, &generator),
        (&decide, &decider),
    ] {
        relation(
            &mut doc.was_associated_with,
            "assoc",
            attrs([
                ("prov:activity", json!(activity)),
                ("prov:agent", json!(agent)),
            ]),
        );
    }
    relation(
        &mut doc.was_informed_by,
        "inf",
        attrs([
            ("prov:informed", json!(decide)),
            ("prov:informant", json!(compose)),
        ]),
    );

    if record.status != Status::Rejected {
        let enact = format!("kl:enactment/{id}");
        doc.activity
            .insert(enact.clone(), attrs([("prov:type", json!("kl:Enactment"))]));
        relation(
            &mut doc.was_associated_with,
            "assoc",
            attrs([
                ("prov:activity", json!(enact)),
                ("prov:agent", json!(requester)),
            ]),
        );
        relation(
            &mut doc.was_informed_by,
            "inf",
            attrs([
                ("prov:informed", json!(enact)),
                ("prov:informant", json!(decide)),
            ]),
        );
    }
    Ok(doc)
}
