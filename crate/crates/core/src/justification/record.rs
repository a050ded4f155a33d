//! Justification records and the prompt chain that composes them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ComposeError;
use crate::generator::{
    blocks_of, Block, BlockError, Exchange, GenerationRequest, GeneratorError, GeneratorIdentity,
    ReplayGenerator, TextGenerator,
};
use crate::knowledge::SourceRef;
use crate::template;
use crate::workflow::{GateDecision, PrincipalId};

/// Attempts per stage before composition gives up.
pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvidenceItem {
    pub id: String,
    pub statement: String,
    pub source: SourceRef,
    pub confidence: f64,
}

impl EvidenceItem {
    pub fn new(
        id: impl Into<String>,
        statement: impl Into<String>,
        source: SourceRef,
        confidence: f64,
    ) -> Self {
        Self {
            id: id.into(),
            statement: statement.into(),
            source,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attack {
    Grounds,
    Warrant,
    Claim,
}

impl Attack {
    fn parse(s: &str) -> Option<Attack> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grounds" => Some(Attack::Grounds),
            "warrant" => Some(Attack::Warrant),
            "claim" => Some(Attack::Claim),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Attack::Grounds => "grounds",
            Attack::Warrant => "warrant",
            Attack::Claim => "claim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Rebuttal {
    pub id: String,
    pub attacks: Attack,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Qualifier {
    pub text: String,
    /// Ids of the rebuttals this qualifier answers.
    #[serde(default)]
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Proposed,
    Approved,
    Rejected,
    Recorded,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Proposed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Proposed => "proposed",
            Status::Approved => "approved",
            Status::Rejected => "rejected",
            Status::Recorded => "recorded",
        }
    }
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Status::Proposed),
            "approved" => Ok(Status::Approved),
            "rejected" => Ok(Status::Rejected),
            "recorded" => Ok(Status::Recorded),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskTier {
    Low,
    /// Needs a human approve verdict before enactment.
    #[default]
    High,
}

/// The six parts of an argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Claim,
    Grounds,
    Warrant,
    Backing,
    Rebuttals,
    Qualifiers,
}

impl Part {
    pub const ALL: [Part; 6] = [
        Part::Claim,
        Part::Grounds,
        Part::Warrant,
        Part::Backing,
        Part::Rebuttals,
        Part::Qualifiers,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Part::Claim => "claim",
            Part::Grounds => "grounds",
            Part::Warrant => "warrant",
            Part::Backing => "backing",
            Part::Rebuttals => "rebuttals",
            Part::Qualifiers => "qualifiers",
        }
    }

    fn template(self) -> &'static str {
        match self {
            Part::Claim => include_str!("../../assets/templates/justification/v1/claim.txt"),
            Part::Grounds => include_str!("../../assets/templates/justification/v1/grounds.txt"),
            Part::Warrant => include_str!("../../assets/templates/justification/v1/warrant.txt"),
            Part::Backing => include_str!("../../assets/templates/justification/v1/backing.txt"),
            Part::Rebuttals => {
                include_str!("../../assets/templates/justification/v1/rebuttals.txt")
            }
            Part::Qualifiers => {
                include_str!("../../assets/templates/justification/v1/qualifiers.txt")
            }
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const TEMPLATE_VERSION: &str = "justification/v1";

/// One generator call made while composing, kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PromptExchange {
    pub stage: Part,
    pub attempt: u32,
    pub seed: u64,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    /// Why the attempt was discarded, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_error: Option<GeneratorError>,
}

/// How a record left the proposed state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Decision {
    pub outcome: GateDecision,
    pub actor: PrincipalId,
    /// False when a low-risk record was recorded without a human verdict.
    pub human: bool,
    pub rationale: String,
    #[serde(default)]
    pub accepted_rebuttals: Vec<String>,
    pub audit_sequence: u64,
    pub at: DateTime<Utc>,
}

/// Input to [`compose_justification`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct JustificationRequest {
    pub intent: String,
    #[serde(default)]
    pub steps: Vec<String>,
    #[serde(default)]
    pub evidence: Vec<EvidenceItem>,
    #[serde(default)]
    pub risk: RiskTier,
    #[serde(default)]
    pub seed: u64,
    /// Agent or principal on whose behalf the record is composed.
    pub created_by: String,
    /// Extra text for the warrant prompt, such as loveliness scores of the
    /// selected explanation. Empty by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warrant_guidance: Option<String>,
}

impl JustificationRequest {
    pub fn new(intent: impl Into<String>, created_by: impl Into<String>) -> Self {
        Self {
            intent: intent.into(),
            steps: Vec::new(),
            evidence: Vec::new(),
            risk: RiskTier::High,
            seed: 0,
            created_by: created_by.into(),
            warrant_guidance: None,
        }
    }

    pub fn with_steps<I, S>(mut self, steps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.steps.extend(steps.into_iter().map(Into::into));
        self
    }

    pub fn with_evidence(mut self, evidence: impl IntoIterator<Item = EvidenceItem>) -> Self {
        self.evidence.extend(evidence);
        self
    }

    pub fn with_risk(mut self, risk: RiskTier) -> Self {
        self.risk = risk;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), ComposeError> {
        if self.intent.trim().is_empty() {
            return Err(ComposeError::EmptyIntent);
        }
        let mut seen = BTreeSet::new();
        for item in &self.evidence {
            let bad = |reason: &str| ComposeError::InvalidEvidence {
                id: item.id.clone(),
                reason: reason.to_owned(),
            };
            if item.id.trim().is_empty() || item.id.contains(char::is_whitespace) {
                return Err(bad("id must be non-empty without whitespace"));
            }
            if !(0.0..=1.0).contains(&item.confidence) {
                return Err(bad("confidence outside [0, 1]"));
            }
            if !seen.insert(item.id.as_str()) {
                return Err(bad("duplicate id"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct JustificationRecord {
    pub id: String,
    pub intent: String,
    pub steps: Vec<String>,
    pub evidence: Vec<EvidenceItem>,
    pub claim: String,
    /// Evidence ids, in the order the generator cited them.
    pub grounds: Vec<String>,
    pub warrant: String,
    pub backing: Vec<String>,
    pub rebuttals: Vec<Rebuttal>,
    pub qualifiers: Vec<Qualifier>,
    pub status: Status,
    pub risk: RiskTier,
    pub created_by: String,
    pub created_at: DateTime<Utc>,
    pub generator: GeneratorIdentity,
    pub seed: u64,
    pub template_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warrant_guidance: Option<String>,
    pub transcript: Vec<PromptExchange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
}

impl JustificationRecord {
    pub fn part_is_empty(&self, part: Part) -> bool {
        match part {
            Part::Claim => self.claim.trim().is_empty(),
            Part::Grounds => self.grounds.is_empty(),
            Part::Warrant => self.warrant.trim().is_empty(),
            Part::Backing => self.backing.is_empty(),
            Part::Rebuttals => self.rebuttals.is_empty(),
            Part::Qualifiers => self.qualifiers.is_empty(),
        }
    }

    /// Parts that are empty, in canonical order.
    pub fn missing_parts(&self) -> Vec<Part> {
        Part::ALL
            .into_iter()
            .filter(|p| self.part_is_empty(*p))
            .collect()
    }

    /// Rebuttal ids no qualifier answers.
    pub fn unanswered_rebuttals(&self) -> Vec<&str> {
        let answered: BTreeSet<&str> = self
            .qualifiers
            .iter()
            .flat_map(|q| q.answers.iter().map(String::as_str))
            .collect();
        self.rebuttals
            .iter()
            .map(|r| r.id.as_str())
            .filter(|id| !answered.contains(id))
            .collect()
    }

    pub fn evidence_item(&self, id: &str) -> Option<&EvidenceItem> {
        self.evidence.iter().find(|e| e.id == id)
    }

    pub fn enactment_permitted(&self) -> bool {
        matches!(self.status, Status::Approved | Status::Recorded)
    }

    /// The request this record was composed from.
    pub fn request(&self) -> JustificationRequest {
        JustificationRequest {
            intent: self.intent.clone(),
            steps: self.steps.clone(),
            evidence: self.evidence.clone(),
            risk: self.risk,
            seed: self.seed,
            created_by: self.created_by.clone(),
            warrant_guidance: self.warrant_guidance.clone(),
        }
    }

    /// Equal argument content, ignoring id, timestamps, status and decision.
    pub fn same_composition(&self, other: &JustificationRecord) -> bool {
        let strip = |r: &JustificationRecord| {
            let mut r = r.clone();
            r.id.clear();
            r.created_at = DateTime::<Utc>::UNIX_EPOCH;
            r.status = Status::Proposed;
            r.decision = None;
            r
        };
        strip(self) == strip(other)
    }
}

struct Chain<'a, G> {
    request: &'a JustificationRequest,
    generator: &'a G,
    transcript: Vec<PromptExchange>,
    slots: BTreeMap<String, String>,
}

impl<G: TextGenerator> Chain<'_, G> {
    fn run<T>(
        &mut self,
        stage: Part,
        mut parse: impl FnMut(&str) -> Result<T, BlockError>,
    ) -> Result<T, ComposeError> {
        let (prompt, _) = template::render(stage.template(), &self.slots)
            .map_err(|e| ComposeError::Template(e.to_string()))?;
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            let seed = self
                .request
                .seed
                .wrapping_add((stage as u64) * u64::from(MAX_ATTEMPTS) + u64::from(attempt));
            let mut request = GenerationRequest::new(prompt.clone(), seed);
            request.temperature = 0.2;
            let mut exchange = PromptExchange {
                stage,
                attempt,
                seed,
                prompt: prompt.clone(),
                response: None,
                error: None,
                generator_error: None,
            };
            match self.generator.complete(&request) {
                Ok(response) => {
                    let outcome = parse(&response.text);
                    exchange.response = Some(response.text);
                    match outcome {
                        Ok(value) => {
                            self.transcript.push(exchange);
                            return Ok(value);
                        }
                        Err(e) => {
                            last = e.to_string();
                            exchange.error = Some(last.clone());
                            self.transcript.push(exchange);
                        }
                    }
                }
                Err(GeneratorError::Transient(msg)) => {
                    last = msg.clone();
                    exchange.error = Some(msg.clone());
                    exchange.generator_error = Some(GeneratorError::Transient(msg));
                    self.transcript.push(exchange);
                }
                Err(err) => {
                    exchange.error = Some(err.to_string());
                    exchange.generator_error = Some(err.clone());
                    self.transcript.push(exchange);
                    return Err(ComposeError::Generator { stage, error: err });
                }
            }
        }
        if self
            .transcript
            .last()
            .is_some_and(|e| e.response.is_none())
        {
            return Err(ComposeError::Generator {
                stage,
                error: GeneratorError::Transient(last),
            });
        }
        Err(ComposeError::Incomplete {
            part: stage,
            attempts: MAX_ATTEMPTS,
            reason: last,
        })
    }
}

fn single_text(text: &str, kind: &str) -> Result<String, BlockError> {
    let blocks = blocks_of(text, kind)?;
    Ok(blocks[0].require("text")?.to_owned())
}

fn texts(text: &str, kind: &str) -> Result<Vec<String>, BlockError> {
    blocks_of(text, kind)?
        .iter()
        .map(|b| b.require("text").map(str::to_owned))
        .collect()
}

fn invalid(kind: &str, key: &str) -> BlockError {
    BlockError::MissingField {
        kind: kind.to_owned(),
        key: key.to_owned(),
    }
}

fn bullet_list<'a>(items: impl Iterator<Item = String> + 'a) -> String {
    let lines: Vec<String> = items.collect();
    if lines.is_empty() {
        "(none)".to_owned()
    } else {
        lines.join("\n")
    }
}

/// Runs the fixed prompt chain claim, grounds, warrant, backing, rebuttals,
/// qualifiers and returns a record in status proposed.
///
/// Each stage is retried up to [`MAX_ATTEMPTS`] times with a fresh seed when
/// the generator fails transiently or its response does not parse. Grounds may
/// be empty only when the request carries no evidence.
pub fn compose_justification<G: TextGenerator + ?Sized>(
    id: impl Into<String>,
    request: &JustificationRequest,
    generator: &G,
    now: DateTime<Utc>,
) -> Result<JustificationRecord, ComposeError> {
    request.validate()?;
    let mut slots = BTreeMap::new();
    slots.insert("intent".to_owned(), request.intent.trim().to_owned());
    slots.insert(
        "steps".to_owned(),
        bullet_list(
            request
                .steps
                .iter()
                .enumerate()
                .map(|(i, s)| format!("{}. {}", i + 1, s)),
        ),
    );
    slots.insert(
        "evidence".to_owned(),
        bullet_list(request.evidence.iter().map(|e| {
            format!(
                "- [{}] {} (source {}, confidence {})",
                e.id, e.statement, e.source, e.confidence
            )
        })),
    );
    slots.insert(
        "guidance".to_owned(),
        request
            .warrant_guidance
            .as_deref()
            .map(|g| format!("guidance: {}\n", g.trim()))
            .unwrap_or_default(),
    );
    let mut chain = Chain {
        request,
        generator: &generator,
        transcript: Vec::new(),
        slots,
    };

    let claim = chain.run(Part::Claim, |t| single_text(t, "claim"))?;
    chain.slots.insert("claim".to_owned(), claim.clone());

    let known: BTreeSet<&str> = request.evidence.iter().map(|e| e.id.as_str()).collect();
    let grounds = chain.run(Part::Grounds, |t| {
        let mut cited: Vec<String> = Vec::new();
        for block in blocks_of(t, "grounds")? {
            for id in block.all("evidence") {
                if !known.contains(id) {
                    return Err(BlockError::Syntax {
                        line: 0,
                        message: format!("grounds cite unknown evidence {id:?}"),
                    });
                }
                if !cited.iter().any(|c| c == id) {
                    cited.push(id.to_owned());
                }
            }
        }
        if cited.is_empty() && !known.is_empty() {
            return Err(invalid("grounds", "evidence"));
        }
        Ok(cited)
    })?;
    chain.slots.insert(
        "grounds".to_owned(),
        bullet_list(grounds.iter().map(|id| {
            let item = request.evidence.iter().find(|e| &e.id == id);
            format!("- [{id}] {}", item.map(|e| e.statement.as_str()).unwrap_or(""))
        })),
    );

    let warrant = chain.run(Part::Warrant, |t| single_text(t, "warrant"))?;
    chain.slots.insert("warrant".to_owned(), warrant.clone());

    let backing = chain.run(Part::Backing, |t| texts(t, "backing"))?;

    let rebuttals = chain.run(Part::Rebuttals, |t| {
        let mut out: Vec<Rebuttal> = Vec::new();
        for block in blocks_of(t, "rebuttals")? {
            let id = block.require("id")?;
            let attacks = Attack::parse(block.require("attacks")?)
                .ok_or_else(|| invalid("rebuttals", "attacks"))?;
            if out.iter().any(|r| r.id == id) {
                return Err(BlockError::Syntax {
                    line: 0,
                    message: format!("rebuttal id {id:?} repeated"),
                });
            }
            out.push(Rebuttal {
                id: id.to_owned(),
                attacks,
                text: block.require("text")?.to_owned(),
            });
        }
        Ok(out)
    })?;
    chain.slots.insert(
        "rebuttals".to_owned(),
        bullet_list(
            rebuttals
                .iter()
                .map(|r| format!("- [{}] ({}) {}", r.id, r.attacks.as_str(), r.text)),
        ),
    );

    let ids: BTreeSet<&str> = rebuttals.iter().map(|r| r.id.as_str()).collect();
    let qualifiers = chain.run(Part::Qualifiers, |t| {
        blocks_of(t, "qualifiers")?
            .iter()
            .map(|b: &Block| {
                let answers: Vec<String> = b.all("answers").map(str::to_owned).collect();
                if let Some(bad) = answers.iter().find(|a| !ids.contains(a.as_str())) {
                    return Err(BlockError::Syntax {
                        line: 0,
                        message: format!("qualifier answers unknown rebuttal {bad:?}"),
                    });
                }
                Ok(Qualifier {
                    text: b.require("text")?.to_owned(),
                    answers,
                })
            })
            .collect()
    })?;

    Ok(JustificationRecord {
        id: id.into(),
        intent: request.intent.trim().to_owned(),
        steps: request.steps.clone(),
        evidence: request.evidence.clone(),
        claim,
        grounds,
        warrant,
        backing,
        rebuttals,
        qualifiers,
        status: Status::Proposed,
        risk: request.risk,
        created_by: request.created_by.clone(),
        created_at: now,
        generator: generator.identity(),
        seed: request.seed,
        template_version: TEMPLATE_VERSION.to_owned(),
        warrant_guidance: request.warrant_guidance.clone(),
        transcript: chain.transcript,
        decision: None,
    })
}

/// Recomposes a record from its stored transcript. The result has the same
/// composition as `record` unless the transcript was tampered with.
pub fn replay_justification(
    record: &JustificationRecord,
) -> Result<JustificationRecord, ComposeError> {
    let generator = ReplayGenerator::new(
        record.generator.clone(),
        record.transcript.iter().map(|e| Exchange {
            prompt: e.prompt.clone(),
            seed: e.seed,
            response: e.response.clone(),
            error: e.generator_error.clone(),
        }),
    );
    compose_justification(
        record.id.clone(),
        &record.request(),
        &generator,
        record.created_at,
    )
}
