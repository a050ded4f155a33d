//! Prompt context assembly: the eight-level ladder of scenario prompts and
//! injection of class definitions from a knowledge model.
//!
//! Levels 1 to 6 grow by extension (`{{previous}}` embeds the level below).
//! Levels 7 and 8 are standalone super prompts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{ClassId, EntityClass, KnowledgeModel, RelationObject};
use crate::template::{self, TemplateError};

pub const TEMPLATE_VERSION: &str = "context/v1";
pub const LEVELS: std::ops::RangeInclusive<u8> = 1..=8;

const LEVEL_TEMPLATES: [&str; 8] = [
    include_str!("../../assets/templates/context/v1/level-1.txt"),
    include_str!("../../assets/templates/context/v1/level-2.txt"),
    include_str!("../../assets/templates/context/v1/level-3.txt"),
    include_str!("../../assets/templates/context/v1/level-4.txt"),
    include_str!("../../assets/templates/context/v1/level-5.txt"),
    include_str!("../../assets/templates/context/v1/level-6.txt"),
    include_str!("../../assets/templates/context/v1/level-7.txt"),
    include_str!("../../assets/templates/context/v1/level-8.txt"),
];

const REFERENCE_PROMPTS: [&str; 8] = [
    include_str!("../../assets/reference/test-1.txt"),
    include_str!("../../assets/reference/test-2.txt"),
    include_str!("../../assets/reference/test-3.txt"),
    include_str!("../../assets/reference/test-4.txt"),
    include_str!("../../assets/reference/test-5.txt"),
    include_str!("../../assets/reference/test-6.txt"),
    include_str!("../../assets/reference/test-7.txt"),
    include_str!("../../assets/reference/test-8.txt"),
];

const PREVIOUS: &str = "previous";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("unknown context level {0} (expected 1 to 8)")]
    UnknownLevel(u8),
    #[error("level {level} needs slot {slot:?}")]
    MissingSlot { level: u8, slot: String },
    #[error("template for level {level}: {source}")]
    Template { level: u8, source: TemplateError },
}

impl ContextError {
    pub fn code(&self) -> &'static str {
        match self {
            ContextError::UnknownLevel(_) => "unknown-level",
            ContextError::MissingSlot { .. } => "missing-slot",
            ContextError::Template { .. } => "template",
        }
    }
}

/// Throughput figures from which the level-8 derived slots are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Throughput {
    pub containers_per_interval: u64,
    pub interval_minutes: u64,
    pub outage_hours: u64,
    /// Whole dollars.
    pub value_per_container: u64,
}

impl Throughput {
    pub fn containers_per_hour(&self) -> u64 {
        self.containers_per_interval * 60 / self.interval_minutes.max(1)
    }

    pub fn backlog(&self) -> u64 {
        self.containers_per_hour() * self.outage_hours
    }

    pub fn lost_revenue(&self) -> u64 {
        self.backlog() * self.value_per_container
    }
}

/// `$2.88 million` for amounts of a million or more, `$10,000` otherwise.
pub fn format_dollars(amount: u64) -> String {
    if amount >= 1_000_000 {
        let millions = format!("{:.2}", amount as f64 / 1e6);
        let trimmed = millions.trim_end_matches('0').trim_end_matches('.');
        return format!("${trimmed} million");
    }
    let digits = amount.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    format!("${out}")
}

/// Named values for the template slots of one scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioFacts {
    slots: BTreeMap<String, String>,
}

impl ScenarioFacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.slots.insert(slot.into(), value.into());
        self
    }

    pub fn get(&self, slot: &str) -> Option<&str> {
        self.slots.get(slot).map(String::as_str)
    }

    pub fn slots(&self) -> &BTreeMap<String, String> {
        &self.slots
    }

    /// Adds the raw throughput figures and the slots derived from them.
    pub fn with_throughput(self, t: Throughput) -> Self {
        self.set("containers_per_interval", t.containers_per_interval.to_string())
            .set("interval_minutes", t.interval_minutes.to_string())
            .set("outage_hours", t.outage_hours.to_string())
            .set("containers_per_hour", t.containers_per_hour().to_string())
            .set("backlog", t.backlog().to_string())
            .set("value_per_container", format_dollars(t.value_per_container))
            .set("lost_revenue", format_dollars(t.lost_revenue()))
    }

    /// The server-outage scenario whose prompts are shipped as reference text.
    pub fn sap_reference() -> Self {
        ScenarioFacts::new()
            .set("server_id", "003")
            .set("role", "SAP Monitoring Expert")
            .set("organisation", "Chemical Manufacturing Company")
            .set("platform", "SAP")
            .set("hosted_module", "Logistics Execution - Delivery and Returns")
            .set("module_code", "LE-DEL")
            .set("facility", "Dispatching Bay 17")
            .set("exposure_amount", "$2.4 million")
            .set("exposure_window", "three hours")
            .set("primary_task", "Avoid High Cost Downtime")
            .set(
                "root_cause_hint",
                "Increasing the ID range on server 003 would have prevented the downtime.",
            )
            .set("bay_code", "0017")
            .set("warehouses", "0024 and 0025")
            .set("max_containers", "10")
            .with_throughput(Throughput {
                containers_per_interval: 8,
                interval_minutes: 5,
                outage_hours: 3,
                value_per_container: 10_000,
            })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ContextProvenance {
    /// Scenario slots that contributed to the text.
    pub slots: BTreeSet<String>,
    /// Ids of injected classes, in injection order.
    pub elements: Vec<ClassId>,
    pub template_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PromptContext {
    pub level: u8,
    pub text: String,
    pub provenance: ContextProvenance,
}

fn template_for(level: u8) -> Result<&'static str, ContextError> {
    if !LEVELS.contains(&level) {
        return Err(ContextError::UnknownLevel(level));
    }
    Ok(LEVEL_TEMPLATES[usize::from(level) - 1].trim_end_matches('\n'))
}

/// Scenario slots needed to render `level`, including lower ladder levels.
pub fn required_slots(level: u8) -> Result<BTreeSet<String>, ContextError> {
    let own = template::slots(template_for(level)?)
        .map_err(|source| ContextError::Template { level, source })?;
    let mut out: BTreeSet<String> = own
        .iter()
        .filter(|s| **s != PREVIOUS)
        .map(|s| (*s).to_owned())
        .collect();
    if own.contains(&PREVIOUS) {
        out.extend(required_slots(level - 1)?);
    }
    Ok(out)
}

/// The reference prompt for ladder test `n` exactly as originally posed.
pub fn reference_prompt(n: u8) -> Option<&'static str> {
    LEVELS
        .contains(&n)
        .then(|| REFERENCE_PROMPTS[usize::from(n) - 1].trim_end_matches('\n'))
}

fn render_level(level: u8, facts: &ScenarioFacts) -> Result<(String, BTreeSet<String>), ContextError> {
    let template = template_for(level)?;
    let slots = template::slots(template).map_err(|source| ContextError::Template { level, source })?;
    let mut values = facts.slots.clone();
    let mut used = BTreeSet::new();
    if slots.contains(&PREVIOUS) {
        let (previous, below) = render_level(level - 1, facts)?;
        values.insert(PREVIOUS.to_owned(), previous);
        used = below;
    }
    if let Some(missing) = slots.iter().find(|s| !values.contains_key(**s)) {
        return Err(ContextError::MissingSlot {
            level,
            slot: (*missing).to_owned(),
        });
    }
    let (text, own) =
        template::render(template, &values).map_err(|source| ContextError::Template { level, source })?;
    used.extend(own.into_iter().filter(|s| s != PREVIOUS));
    Ok((text, used))
}

/// Renders ladder level `level` for `facts`. With a model, classes whose id or
/// label the prompt mentions are appended as semantic context.
pub fn assemble_context(
    level: u8,
    facts: &ScenarioFacts,
    model: Option<&KnowledgeModel>,
) -> Result<PromptContext, ContextError> {
    let (text, slots) = render_level(level, facts)?;
    let base = PromptContext {
        level,
        text,
        provenance: ContextProvenance {
            slots,
            elements: Vec::new(),
            template_version: TEMPLATE_VERSION.to_owned(),
            model_hash: None,
        },
    };
    Ok(match model {
        Some(m) => inject_semantic_context(&base, m, &ClassSelector::Mentioned),
        None => base,
    })
}

/// Which classes of a model to inject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassSelector {
    All,
    /// Listed ids that exist in the model; unknown ids are ignored.
    Ids(Vec<ClassId>),
    /// Classes whose id or label occurs in the prompt (case-insensitive).
    Mentioned,
}

impl ClassSelector {
    fn resolve<'m>(&self, model: &'m KnowledgeModel, text: &str) -> Vec<&'m EntityClass> {
        let lower = text.to_lowercase();
        model
            .classes()
            .filter(|c| match self {
                ClassSelector::All => true,
                ClassSelector::Ids(ids) => ids.contains(&c.id),
                ClassSelector::Mentioned => {
                    lower.contains(&c.id.as_str().to_lowercase())
                        || (!c.label.is_empty() && lower.contains(&c.label.to_lowercase()))
                }
            })
            .collect()
    }
}

/// Text appended for one class, including its leading separator.
pub fn render_fragment(model: &KnowledgeModel, class: &EntityClass) -> String {
    let mut out = format!(
        "\n\n{} ({}): {}",
        class.label,
        class.id,
        class.definition.as_deref().unwrap_or("no definition recorded")
    );
    for p in &class.properties {
        out.push_str(&format!("\n- property {}: {}", p.name, p.value_type.as_str()));
    }
    for e in &class.exemplars {
        out.push_str(&format!("\n- {} exemplar {}: {}", e.kind.as_str(), e.label, e.rationale));
    }
    for r in model.relationships().filter(|r| r.subject == class.id) {
        let object = match &r.object {
            RelationObject::Class(c) => c.to_string(),
            RelationObject::Literal(l) => format!("{:?}", l.value),
        };
        out.push_str(&format!("\n- {} {} {}", class.id, r.predicate, object));
    }
    out
}

/// Appends definitions, properties, exemplars and outgoing relationships of
/// the selected classes. An empty selection leaves the text untouched.
pub fn inject_semantic_context(
    base: &PromptContext,
    model: &KnowledgeModel,
    selector: &ClassSelector,
) -> PromptContext {
    let mut out = base.clone();
    out.provenance.model_hash = Some(model.content_hash());
    for class in selector.resolve(model, &base.text) {
        if out.provenance.elements.contains(&class.id) {
            continue;
        }
        out.text.push_str(&render_fragment(model, class));
        out.provenance.elements.push(class.id.clone());
    }
    out
}
