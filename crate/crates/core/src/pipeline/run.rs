use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, StepError};
use crate::context::render_fragment;
use crate::generator::{parse_blocks, Block, GenerationRequest, GeneratorIdentity, TextGenerator};
use crate::knowledge::{
    merge_models, ClassId, EntityClass, Exemplar, ExemplarKind, KnowledgeModel, Literal, ModelId,
    ModelParts, ParentRef, Provenance, RelationObject, Relationship, Resolution, SourceRef,
    ValueType,
};
use crate::ontology::export_rdfxml;
use crate::template;
use crate::workflow::{
    consistency_check, transition, AuditLog, Principal, PrincipalId, WorkflowState,
};

pub const TEMPLATE_VERSION: &str = "pipeline/v1";

pub const STEP_TITLES: [&str; 12] = [
    "extract source elements",
    "propose relationships",
    "prioritise existing relationships",
    "identify implicit classes",
    "archetypical exemplars",
    "atypical exemplars",
    "exotypical exemplars",
    "definitions",
    "export candidate",
    "human validation",
    "publication",
    "merge into universe",
];

fn step_template(step: u8) -> Option<&'static str> {
    Some(match step {
        1 => include_str!("../../assets/templates/pipeline/v1/step-01.txt"),
        2 => include_str!("../../assets/templates/pipeline/v1/step-02.txt"),
        4 => include_str!("../../assets/templates/pipeline/v1/step-04.txt"),
        5 => include_str!("../../assets/templates/pipeline/v1/step-05.txt"),
        6 => include_str!("../../assets/templates/pipeline/v1/step-06.txt"),
        7 => include_str!("../../assets/templates/pipeline/v1/step-07.txt"),
        8 => include_str!("../../assets/templates/pipeline/v1/step-08.txt"),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SourceDocument {
    pub reference: SourceRef,
    pub text: String,
}

impl SourceDocument {
    pub fn new(reference: SourceRef, text: impl Into<String>) -> Self {
        Self {
            reference,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClassProposal {
    pub id: ClassId,
    pub label: String,
    /// Set for classes neither input stated explicitly.
    pub implicit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DroppedProposal {
    pub id: ClassId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RejectedProposal {
    pub relationship: Relationship,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClassExemplar {
    pub class: ClassId,
    pub exemplar: Exemplar,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ImplicitClasses {
    pub proposals: Vec<ClassProposal>,
    pub dropped: Vec<DroppedProposal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TransitionRecord {
    pub audit_sequence: u64,
    pub actor: PrincipalId,
    pub from: WorkflowState,
    pub to: WorkflowState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "artifact", rename_all = "kebab-case")]
pub enum StepArtifact {
    Elements {
        elements: Vec<ClassProposal>,
        /// Elements that name classes the base model already has.
        existing: Vec<ClassId>,
    },
    Relationships {
        proposals: Vec<Relationship>,
    },
    Reconciled {
        accepted: Vec<Relationship>,
        /// Proposals identical to a base relationship.
        confirmed: Vec<Relationship>,
        rejected: Vec<RejectedProposal>,
    },
    ImplicitClasses(ImplicitClasses),
    Exemplars {
        kind: ExemplarKind,
        exemplars: Vec<ClassExemplar>,
    },
    Definitions {
        definitions: BTreeMap<ClassId, String>,
    },
    Exported {
        candidate: ModelId,
        content_hash: String,
        document: String,
    },
    Transitions {
        transitions: Vec<TransitionRecord>,
    },
    Merged {
        universe: ParentRef,
        candidate: ParentRef,
        resolutions: Vec<Resolution>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct StepRecord {
    pub step: u8,
    pub title: String,
    /// Absent for steps that make no generator call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    pub artifact: StepArtifact,
}

/// A generator call whose result was not usable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct StepFailure {
    pub step: u8,
    pub prompt: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    pub error: String,
}

/// The full state of one enhancement run. Serializing it is a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EnhancementRun {
    pub id: String,
    pub source: SourceDocument,
    pub base: ParentRef,
    pub seed: u64,
    pub generator: GeneratorIdentity,
    pub template_version: String,
    pub steps: Vec<StepRecord>,
    pub failures: Vec<StepFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<ModelParts>,
}

fn run_id(base: &ParentRef, source: &SourceDocument, seed: u64) -> String {
    let digest = Sha256::new()
        .chain_update(base.content_hash.as_bytes())
        .chain_update(source.reference.to_string().as_bytes())
        .chain_update([0])
        .chain_update(source.text.as_bytes())
        .chain_update(seed.to_le_bytes())
        .finalize();
    format!("run-{}", &hex::encode(digest)[..12])
}

fn parse_err(message: impl Into<String>) -> StepError {
    StepError::Parse(message.into())
}

fn require<'a>(block: &'a Block, key: &str) -> Result<&'a str, StepError> {
    block.require(key).map_err(|e| parse_err(e.to_string()))
}

fn class_id(raw: &str) -> Result<ClassId, StepError> {
    if raw.is_empty() || raw.contains(char::is_whitespace) {
        return Err(parse_err(format!("{raw:?} is not a class identifier")));
    }
    Ok(ClassId::new(raw))
}

/// Blocks of `kind`; `## none` alone stands for an empty answer when allowed.
fn blocks(text: &str, kind: &str, allow_none: bool) -> Result<Vec<Block>, StepError> {
    let all = parse_blocks(text).map_err(|e| parse_err(e.to_string()))?;
    let mut out = Vec::new();
    for block in all {
        if block.kind == kind {
            out.push(block);
        } else if !(allow_none && block.kind == "none") {
            return Err(parse_err(format!("unexpected block {:?}", block.kind)));
        }
    }
    if out.is_empty() && !allow_none {
        return Err(parse_err(format!("no {kind} block")));
    }
    Ok(out)
}

fn model_summary(model: &KnowledgeModel) -> String {
    let mut out = format!("model {} version {}", model.id(), model.version());
    if model.is_empty() {
        out.push_str("\n(no classes)");
    }
    for class in model.classes() {
        out.push_str(&render_fragment(model, class));
    }
    out
}

fn render_relationship(r: &Relationship) -> String {
    match &r.object {
        RelationObject::Class(c) => format!("- {} {} {}", r.subject, r.predicate, c),
        RelationObject::Literal(l) => format!(
            "- {} {} {:?}^^{}",
            r.subject,
            r.predicate,
            l.value,
            l.value_type.as_str()
        ),
    }
}

fn list_or_none(lines: Vec<String>) -> String {
    if lines.is_empty() {
        "(none)".to_owned()
    } else {
        lines.join("\n")
    }
}

impl EnhancementRun {
    /// Step the run will execute next (1 to 12), or 13 when finished.
    pub fn next_step(&self) -> u8 {
        self.steps.len() as u8 + 1
    }

    pub fn step(&self, step: u8) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.step == step)
    }

    /// The candidate model, once step 9 has run.
    pub fn candidate(&self) -> Option<KnowledgeModel> {
        self.candidate.clone().map(KnowledgeModel::from_parts)
    }

    /// Prompts actually sent, in order, including failed attempts.
    pub fn generator_calls(&self) -> usize {
        self.steps.iter().filter(|s| s.prompt.is_some()).count() + self.failures.len()
    }

    pub fn rejected_relationships(&self) -> &[RejectedProposal] {
        match self.step(3).map(|s| &s.artifact) {
            Some(StepArtifact::Reconciled { rejected, .. }) => rejected,
            _ => &[],
        }
    }

    fn elements(&self) -> (&[ClassProposal], &[ClassId]) {
        match self.step(1).map(|s| &s.artifact) {
            Some(StepArtifact::Elements { elements, existing }) => (elements, existing),
            _ => (&[], &[]),
        }
    }

    fn accepted(&self) -> &[Relationship] {
        match self.step(3).map(|s| &s.artifact) {
            Some(StepArtifact::Reconciled { accepted, .. }) => accepted,
            _ => &[],
        }
    }

    fn implicit(&self) -> &[ClassProposal] {
        match self.step(4).map(|s| &s.artifact) {
            Some(StepArtifact::ImplicitClasses(found)) => &found.proposals,
            _ => &[],
        }
    }

    fn exemplars(&self) -> Vec<&ClassExemplar> {
        self.steps
            .iter()
            .filter_map(|s| match &s.artifact {
                StepArtifact::Exemplars { exemplars, .. } => Some(exemplars.iter()),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// New classes proposed so far: source elements, then implicit classes.
    pub fn new_classes(&self) -> Vec<&ClassProposal> {
        self.elements().0.iter().chain(self.implicit()).collect()
    }

    fn new_class_ids(&self) -> BTreeSet<ClassId> {
        self.new_classes().into_iter().map(|c| c.id.clone()).collect()
    }

    fn slots(&self, base: &KnowledgeModel) -> BTreeMap<String, String> {
        let mut slots = BTreeMap::new();
        slots.insert("model".to_owned(), model_summary(base));
        slots.insert("source".to_owned(), self.source.text.trim().to_owned());
        let elements: Vec<&str> = self.elements().0.iter().map(|e| e.id.as_str()).collect();
        slots.insert("elements".to_owned(), elements.join(", "));
        slots.insert(
            "relationships".to_owned(),
            list_or_none(self.accepted().iter().map(render_relationship).collect()),
        );
        let classes: Vec<String> = self
            .new_classes()
            .iter()
            .map(|c| format!("{} ({})", c.id, c.label))
            .collect();
        slots.insert("classes".to_owned(), classes.join(", "));
        let exemplars = self.exemplars();
        let line = |e: &ClassExemplar| {
            let props = if e.exemplar.properties.is_empty() {
                String::new()
            } else {
                format!(" [{}]", e.exemplar.properties.join(", "))
            };
            format!(
                "- {}: {} {}{}",
                e.class,
                e.exemplar.kind.as_str(),
                e.exemplar.label,
                props
            )
        };
        slots.insert(
            "archetypes".to_owned(),
            list_or_none(
                exemplars
                    .iter()
                    .filter(|e| e.exemplar.kind == ExemplarKind::Archetypical)
                    .map(|e| line(e))
                    .collect(),
            ),
        );
        slots.insert(
            "exemplars".to_owned(),
            list_or_none(exemplars.iter().map(|e| line(e)).collect()),
        );
        slots
    }

    fn ensure_base(&self, base: &KnowledgeModel) -> Result<(), PipelineError> {
        let found = base.parent_ref();
        if found != self.base {
            return Err(PipelineError::BaseMismatch {
                expected: format!("{} v{}", self.base.model, self.base.version),
                found: format!("{} v{}", found.model, found.version),
            });
        }
        Ok(())
    }

    fn interrupt(&self, step: u8, cause: StepError) -> PipelineError {
        PipelineError::Interrupted {
            step,
            cause,
            checkpoint: Box::new(self.clone()),
        }
    }

    /// Runs the pending steps up to and including step 9.
    fn advance<G: TextGenerator + ?Sized>(
        &mut self,
        base: &KnowledgeModel,
        generator: &G,
    ) -> Result<(), PipelineError> {
        self.ensure_base(base)?;
        while self.next_step() <= 9 {
            let step = self.next_step();
            let record = match step {
                3 => self.reconcile(base),
                9 => self.export(base)?,
                _ => self.generate(step, base, generator)?,
            };
            self.steps.push(record);
        }
        Ok(())
    }

    fn generate<G: TextGenerator + ?Sized>(
        &mut self,
        step: u8,
        base: &KnowledgeModel,
        generator: &G,
    ) -> Result<StepRecord, PipelineError> {
        let template = step_template(step).expect("generator step has a template");
        let (prompt, _) = template::render(template, &self.slots(base))
            .map_err(|e| self.interrupt(step, parse_err(e.to_string())))?;
        let seed = self.seed.wrapping_add(u64::from(step));
        let request = GenerationRequest::new(prompt.clone(), seed);
        let response = match generator.complete(&request) {
            Ok(r) => r.text,
            Err(e) => {
                self.failures.push(StepFailure {
                    step,
                    prompt,
                    seed,
                    response: None,
                    error: e.to_string(),
                });
                return Err(self.interrupt(step, StepError::Generator(e)));
            }
        };
        match self.parse_step(step, &response, base) {
            Ok(artifact) => Ok(StepRecord {
                step,
                title: STEP_TITLES[usize::from(step) - 1].to_owned(),
                prompt: Some(prompt),
                seed: Some(seed),
                response: Some(response),
                artifact,
            }),
            Err(cause) => {
                self.failures.push(StepFailure {
                    step,
                    prompt,
                    seed,
                    response: Some(response),
                    error: cause.to_string(),
                });
                Err(self.interrupt(step, cause))
            }
        }
    }

    fn parse_step(
        &self,
        step: u8,
        text: &str,
        base: &KnowledgeModel,
    ) -> Result<StepArtifact, StepError> {
        match step {
            1 => {
                let mut elements: Vec<ClassProposal> = Vec::new();
                let mut existing = Vec::new();
                for block in blocks(text, "element", false)? {
                    let id = class_id(require(&block, "id")?)?;
                    if base.contains_class(&id) {
                        if !existing.contains(&id) {
                            existing.push(id);
                        }
                        continue;
                    }
                    if elements.iter().any(|e| e.id == id) {
                        return Err(parse_err(format!("element {id} listed twice")));
                    }
                    let label = block.get("label").unwrap_or(id.as_str()).to_owned();
                    elements.push(ClassProposal {
                        id,
                        label,
                        implicit: false,
                        rationale: None,
                    });
                }
                Ok(StepArtifact::Elements { elements, existing })
            }
            2 => {
                let mut proposals = Vec::new();
                for block in blocks(text, "relationship", true)? {
                    let subject = class_id(require(&block, "subject")?)?;
                    let predicate = require(&block, "predicate")?.to_owned();
                    let object = match (block.get("object"), block.get("literal")) {
                        (Some(o), None) => RelationObject::Class(class_id(o)?),
                        (None, Some(value)) => {
                            let value_type: ValueType = require(&block, "type")?
                                .parse()
                                .map_err(|e: crate::knowledge::ModelError| parse_err(e.to_string()))?;
                            RelationObject::Literal(
                                Literal::new(value, value_type)
                                    .map_err(|e| parse_err(e.to_string()))?,
                            )
                        }
                        _ => {
                            return Err(parse_err(
                                "relationship needs exactly one of object or literal",
                            ))
                        }
                    };
                    proposals.push(Relationship {
                        subject,
                        predicate,
                        object,
                        provenance: self.source.reference.clone(),
                    });
                }
                Ok(StepArtifact::Relationships { proposals })
            }
            4 => Ok(StepArtifact::ImplicitClasses(implicit_from_response(
                text,
                &self.known_ids(base),
            )?)),
            5..=7 => {
                let kind = match step {
                    5 => ExemplarKind::Archetypical,
                    6 => ExemplarKind::Atypical,
                    _ => ExemplarKind::Exotypical,
                };
                let targets = self.new_class_ids();
                let mut exemplars: Vec<ClassExemplar> = Vec::new();
                for block in blocks(text, "exemplar", kind == ExemplarKind::Atypical)? {
                    let class = class_id(require(&block, "class")?)?;
                    if !targets.contains(&class) {
                        return Err(parse_err(format!("exemplar for unknown class {class}")));
                    }
                    let exemplar = Exemplar::new(
                        kind,
                        require(&block, "label")?,
                        require(&block, "rationale")?,
                    )
                    .with_properties(block.all("property"));
                    exemplars.push(ClassExemplar { class, exemplar });
                }
                for class in &targets {
                    let mut probe = EntityClass::new(class.clone(), class.as_str());
                    probe.exemplars = exemplars
                        .iter()
                        .filter(|e| &e.class == class)
                        .map(|e| e.exemplar.clone())
                        .collect();
                    probe.validate().map_err(|e| parse_err(e.to_string()))?;
                }
                Ok(StepArtifact::Exemplars { kind, exemplars })
            }
            8 => {
                let targets = self.new_class_ids();
                let mut definitions = BTreeMap::new();
                for block in blocks(text, "definition", false)? {
                    let class = class_id(require(&block, "class")?)?;
                    if !targets.contains(&class) {
                        return Err(parse_err(format!("definition for unknown class {class}")));
                    }
                    if definitions
                        .insert(class.clone(), require(&block, "text")?.to_owned())
                        .is_some()
                    {
                        return Err(parse_err(format!("class {class} defined twice")));
                    }
                }
                Ok(StepArtifact::Definitions { definitions })
            }
            _ => unreachable!("step {step} makes no generator call"),
        }
    }

    fn known_ids(&self, base: &KnowledgeModel) -> BTreeSet<ClassId> {
        base.classes()
            .map(|c| c.id.clone())
            .chain(self.elements().0.iter().map(|e| e.id.clone()))
            .collect()
    }

    /// Step 3: a proposal that would give an existing (subject, predicate) slot
    /// a different object loses to the relationship already in the base.
    fn reconcile(&self, base: &KnowledgeModel) -> StepRecord {
        let known = self.known_ids(base);
        let proposals = match self.step(2).map(|s| &s.artifact) {
            Some(StepArtifact::Relationships { proposals }) => proposals.as_slice(),
            _ => &[],
        };
        let mut accepted: Vec<Relationship> = Vec::new();
        let mut confirmed = Vec::new();
        let mut rejected = Vec::new();
        for proposal in proposals {
            let unknown = std::iter::once(&proposal.subject)
                .chain(proposal.object.as_class())
                .find(|id| !known.contains(*id));
            if let Some(id) = unknown {
                rejected.push(RejectedProposal {
                    relationship: proposal.clone(),
                    reason: format!("refers to unknown class {id}"),
                });
                continue;
            }
            let same = |r: &Relationship| {
                r.subject == proposal.subject
                    && r.predicate == proposal.predicate
                    && r.object == proposal.object
            };
            if let Some(existing) = base.relationships().find(|r| same(r)) {
                confirmed.push(existing.clone());
                continue;
            }
            if let Some(existing) = base
                .relationships()
                .find(|r| r.key() == proposal.key())
            {
                rejected.push(RejectedProposal {
                    relationship: proposal.clone(),
                    reason: format!(
                        "collides with existing relationship {}; existing relationship retained",
                        render_relationship(existing).trim_start_matches("- ")
                    ),
                });
                continue;
            }
            if !accepted.iter().any(|r| same(r)) {
                accepted.push(proposal.clone());
            }
        }
        StepRecord {
            step: 3,
            title: STEP_TITLES[2].to_owned(),
            prompt: None,
            seed: None,
            response: None,
            artifact: StepArtifact::Reconciled {
                accepted,
                confirmed,
                rejected,
            },
        }
    }

    /// Step 9: assemble the Draft candidate and export it as RDF/XML.
    fn export(&mut self, base: &KnowledgeModel) -> Result<StepRecord, PipelineError> {
        let definitions = match self.step(8).map(|s| &s.artifact) {
            Some(StepArtifact::Definitions { definitions }) => definitions.clone(),
            _ => BTreeMap::new(),
        };
        let mut classes: BTreeMap<ClassId, EntityClass> = BTreeMap::new();
        for proposal in self.new_classes() {
            let mut class = EntityClass::new(proposal.id.clone(), proposal.label.clone());
            class.definition = definitions.get(&proposal.id).cloned();
            class.exemplars = self
                .exemplars()
                .into_iter()
                .filter(|e| e.class == proposal.id)
                .map(|e| e.exemplar.clone())
                .collect();
            class.validate()?;
            classes.insert(class.id.clone(), class);
        }
        let accepted = self.accepted().to_vec();
        for r in &accepted {
            for id in std::iter::once(&r.subject).chain(r.object.as_class()) {
                if let (false, Some(c)) = (classes.contains_key(id), base.class(id)) {
                    classes.insert(id.clone(), c.clone());
                }
            }
        }
        let mut relationships: BTreeSet<Relationship> = accepted.into_iter().collect();
        relationships.extend(
            base.relationships()
                .filter(|r| {
                    classes.contains_key(&r.subject)
                        && r.object.as_class().is_none_or(|o| classes.contains_key(o))
                })
                .cloned(),
        );
        let hash8 = &self.id["run-".len().."run-".len() + 8];
        let parts = ModelParts {
            id: ModelId::new(format!("{}-{}", base.id(), hash8)),
            name: format!("{} enhancement from {}", base.name(), self.source.reference),
            version: 1,
            state: WorkflowState::Draft,
            provenance: Provenance {
                sources: BTreeSet::from([self.source.reference.clone()]),
                parents: BTreeSet::from([self.base.clone()]),
            },
            classes: classes.into_values().collect(),
            relationships: relationships.into_iter().collect(),
        };
        let candidate = KnowledgeModel::from_parts(parts);
        let document = export_rdfxml(&candidate)?;
        let artifact = StepArtifact::Exported {
            candidate: candidate.id().clone(),
            content_hash: candidate.content_hash(),
            document,
        };
        self.candidate = Some(candidate.into_parts());
        Ok(StepRecord {
            step: 9,
            title: STEP_TITLES[8].to_owned(),
            prompt: None,
            seed: None,
            response: None,
            artifact,
        })
    }

    fn expect_step(&self, step: u8) -> Result<KnowledgeModel, PipelineError> {
        if self.next_step() != step {
            return Err(PipelineError::OutOfOrder {
                requested: step,
                next: self.next_step(),
            });
        }
        Ok(self.candidate().expect("candidate exists after step 9"))
    }

    fn push_transitions(&mut self, step: u8, model: KnowledgeModel, transitions: Vec<TransitionRecord>) {
        self.candidate = Some(model.into_parts());
        self.steps.push(StepRecord {
            step,
            title: STEP_TITLES[usize::from(step) - 1].to_owned(),
            prompt: None,
            seed: None,
            response: None,
            artifact: StepArtifact::Transitions { transitions },
        });
    }

    /// Step 10: the contributor submits the candidate for review and a reviewer
    /// validates it (Draft to InReview to ReadyToPublish).
    pub fn validate(
        &mut self,
        contributor: &Principal,
        reviewer: &Principal,
        rationale: &str,
        log: &mut AuditLog,
        now: DateTime<Utc>,
    ) -> Result<KnowledgeModel, PipelineError> {
        let draft = self.expect_step(10)?;
        let mut records = Vec::new();
        let mut model = draft;
        for (actor, target) in [
            (contributor, WorkflowState::InReview),
            (reviewer, WorkflowState::ReadyToPublish),
        ] {
            let from = model.state();
            model = transition(&model, target, actor, rationale, log, now)?;
            records.push(TransitionRecord {
                audit_sequence: log.next_sequence() - 1,
                actor: actor.id.clone(),
                from,
                to: target,
            });
        }
        self.push_transitions(10, model.clone(), records);
        Ok(model)
    }

    /// Step 11: a publisher publishes the validated candidate.
    pub fn publish(
        &mut self,
        publisher: &Principal,
        rationale: &str,
        log: &mut AuditLog,
        now: DateTime<Utc>,
    ) -> Result<KnowledgeModel, PipelineError> {
        let ready = self.expect_step(11)?;
        let from = ready.state();
        let model = transition(&ready, WorkflowState::Published, publisher, rationale, log, now)?;
        let record = TransitionRecord {
            audit_sequence: log.next_sequence() - 1,
            actor: publisher.id.clone(),
            from,
            to: WorkflowState::Published,
        };
        self.push_transitions(11, model.clone(), vec![record]);
        Ok(model)
    }

    /// Step 12: merges the published candidate into `universe`. The result keeps
    /// the universe's id and name, at the next version, in Draft.
    pub fn merge_into(
        &mut self,
        universe: &KnowledgeModel,
        resolutions: &[Resolution],
    ) -> Result<KnowledgeModel, PipelineError> {
        let candidate = self.expect_step(12)?;
        let merged = merge_models(universe, &candidate, resolutions)?;
        let mut parts = merged.into_parts();
        parts.id = universe.id().clone();
        parts.name = universe.name().to_owned();
        parts.version = universe.version() + 1;
        let merged = KnowledgeModel::from_parts(parts);
        self.steps.push(StepRecord {
            step: 12,
            title: STEP_TITLES[11].to_owned(),
            prompt: None,
            seed: None,
            response: None,
            artifact: StepArtifact::Merged {
                universe: universe.parent_ref(),
                candidate: candidate.parent_ref(),
                resolutions: resolutions.to_vec(),
            },
        });
        Ok(merged)
    }
}

fn implicit_from_response(
    text: &str,
    known: &BTreeSet<ClassId>,
) -> Result<ImplicitClasses, StepError> {
    let mut found = ImplicitClasses::default();
    for block in blocks(text, "class", true)? {
        let id = class_id(require(&block, "id")?)?;
        let rationale = require(&block, "rationale")?.to_owned();
        let reason = if known.contains(&id) {
            Some("duplicates an existing class id")
        } else if found.proposals.iter().any(|p| p.id == id) {
            Some("proposed twice")
        } else {
            None
        };
        match reason {
            Some(reason) => found.dropped.push(DroppedProposal {
                id,
                reason: reason.to_owned(),
            }),
            None => found.proposals.push(ClassProposal {
                label: block.get("label").unwrap_or(id.as_str()).to_owned(),
                id,
                implicit: true,
                rationale: Some(rationale),
            }),
        }
    }
    Ok(found)
}

/// Implicit class proposals recorded at step 4, with duplicates already
/// dropped. Empty until step 4 has run.
pub fn identify_implicit_classes(run: &EnhancementRun) -> ImplicitClasses {
    match run.step(4).map(|s| &s.artifact) {
        Some(StepArtifact::ImplicitClasses(found)) => found.clone(),
        _ => ImplicitClasses::default(),
    }
}

/// Runs steps 1 to 9 against `base` for a new source.
pub fn run_enhancement<G: TextGenerator + ?Sized>(
    base: &KnowledgeModel,
    source: SourceDocument,
    generator: &G,
    seed: u64,
) -> Result<EnhancementRun, PipelineError> {
    let report = consistency_check(base);
    if report.has_errors() {
        return Err(PipelineError::BaseInconsistent(report));
    }
    if source.text.trim().is_empty() {
        return Err(PipelineError::EmptySource);
    }
    let parent = base.parent_ref();
    let mut run = EnhancementRun {
        id: run_id(&parent, &source, seed),
        source,
        base: parent,
        seed,
        generator: generator.identity(),
        template_version: TEMPLATE_VERSION.to_owned(),
        steps: Vec::new(),
        failures: Vec::new(),
        candidate: None,
    };
    run.advance(base, generator)?;
    Ok(run)
}

/// Continues an interrupted run from the step that failed.
pub fn resume_enhancement<G: TextGenerator + ?Sized>(
    mut checkpoint: EnhancementRun,
    base: &KnowledgeModel,
    generator: &G,
) -> Result<EnhancementRun, PipelineError> {
    checkpoint.advance(base, generator)?;
    Ok(checkpoint)
}
