//! The text-generator contract, a deterministic mock, and the structured
//! response blocks that prompts ask generators to emit.
//!
//! A block is a `## kind` header followed by `key: value` lines. Keys may
//! repeat. Anything else outside blank lines is a parse failure; free text is
//! never guessed at.

use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub seed: u64,
    pub max_length: usize,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, seed: u64) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: 0.0,
            seed,
            max_length: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GeneratorIdentity {
    pub name: String,
    pub version: String,
}

impl GeneratorIdentity {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
        }
    }
}

impl fmt::Display for GeneratorIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenerationResponse {
    pub text: String,
    pub generator: GeneratorIdentity,
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorError {
    /// Worth retrying.
    #[error("transient generator failure: {0}")]
    Transient(String),
    #[error("generator unavailable: {0}")]
    Unavailable(String),
}

pub trait TextGenerator: Send + Sync {
    fn identity(&self) -> GeneratorIdentity;
    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError>;
}

impl<G: TextGenerator + ?Sized> TextGenerator for &G {
    fn identity(&self) -> GeneratorIdentity {
        (**self).identity()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError> {
        (**self).complete(request)
    }
}

impl<G: TextGenerator + ?Sized> TextGenerator for Box<G> {
    fn identity(&self) -> GeneratorIdentity {
        (**self).identity()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError> {
        (**self).complete(request)
    }
}

impl<G: TextGenerator + ?Sized> TextGenerator for std::sync::Arc<G> {
    fn identity(&self) -> GeneratorIdentity {
        (**self).identity()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError> {
        (**self).complete(request)
    }
}

/// Marker line in a prompt naming the block kind the response must contain.
pub const RESPOND_WITH: &str = "respond-with:";

/// The block kind a prompt asks for, from its `respond-with:` line.
pub fn requested_kind(prompt: &str) -> Option<&str> {
    prompt
        .lines()
        .find_map(|l| l.trim().strip_prefix(RESPOND_WITH))
        .map(str::trim)
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Deterministic generator: the response is a pure function of the prompt and
/// seed. Scripted rules are tried in order (first whose pattern occurs in the
/// prompt wins); otherwise a small synthesizer answers the requested block kind
/// from what the prompt itself contains.
#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    rules: Vec<(String, String)>,
}

impl MockGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers any prompt containing `pattern` with `response`.
    pub fn rule(mut self, pattern: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push((pattern.into(), response.into()));
        self
    }

    fn synthesize(prompt: &str, seed: u64) -> String {
        let digest = Sha256::new()
            .chain_update(prompt.as_bytes())
            .chain_update(seed.to_le_bytes())
            .finalize();
        let tag = hex::encode(&digest[..4]);
        let field = |key: &str| {
            prompt
                .lines()
                .find_map(|l| l.trim().strip_prefix(key))
                .map(str::trim)
                .unwrap_or_default()
        };
        let evidence: Vec<&str> = prompt
            .lines()
            .filter_map(|l| l.trim().strip_prefix("- [")?.split_once(']'))
            .map(|(id, _)| id)
            .collect();
        match requested_kind(prompt) {
            Some("claim") => {
                let step = prompt
                    .lines()
                    .find_map(|l| l.trim().strip_prefix("1. "))
                    .unwrap_or("act on the stated intent");
                format!("## claim\ntext: To {}, {}.\n", lower_first(field("intent:")), lower_first(step))
            }
            Some("grounds") => {
                let mut out = String::from("## grounds\n");
                for id in evidence {
                    out.push_str(&format!("evidence: {id}\n"));
                }
                out
            }
            Some("warrant") => format!(
                "## warrant\ntext: The cited facts show that the claim serves the intent ({}).\n",
                field("intent:")
            ),
            Some("backing") => format!("## backing\ntext: Operational runbook entry {tag}.\n"),
            Some("rebuttals") => "## rebuttals\nid: r1\nattacks: warrant\ntext: The facts may describe an unrelated incident.\n".to_owned(),
            Some("qualifiers") => "## qualifiers\ntext: Applies while the cited facts remain current.\nanswers: r1\n".to_owned(),
            Some(kind) => format!("## {kind}\nnote: no scripted answer ({tag})\n"),
            None => format!("No structured answer requested ({tag})."),
        }
    }
}

impl TextGenerator for MockGenerator {
    fn identity(&self) -> GeneratorIdentity {
        GeneratorIdentity::new("knowloop-mock", "1")
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError> {
        let text = self
            .rules
            .iter()
            .find(|(pattern, _)| request.prompt.contains(pattern.as_str()))
            .map(|(_, response)| response.clone())
            .unwrap_or_else(|| Self::synthesize(&request.prompt, request.seed));
        let mut text = text;
        if text.len() > request.max_length {
            let mut cut = request.max_length;
            while !text.is_char_boundary(cut) {
                cut -= 1;
            }
            text.truncate(cut);
        }
        Ok(GenerationResponse {
            text,
            generator: self.identity(),
        })
    }
}

/// One stored generator exchange. A failed call has no response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Exchange {
    pub prompt: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<GeneratorError>,
}

/// Plays back recorded exchanges in order, checking that each prompt matches.
#[derive(Debug)]
pub struct ReplayGenerator {
    identity: GeneratorIdentity,
    exchanges: Mutex<VecDeque<Exchange>>,
}

impl ReplayGenerator {
    pub fn new(identity: GeneratorIdentity, exchanges: impl IntoIterator<Item = Exchange>) -> Self {
        Self {
            identity,
            exchanges: Mutex::new(exchanges.into_iter().collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.exchanges.lock().expect("replay lock").len()
    }
}

impl TextGenerator for ReplayGenerator {
    fn identity(&self) -> GeneratorIdentity {
        self.identity.clone()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError> {
        let next = self.exchanges.lock().expect("replay lock").pop_front();
        match next {
            Some(e) if e.prompt == request.prompt && e.seed == request.seed => match (e.response, e.error) {
                (Some(text), _) => Ok(GenerationResponse {
                    text,
                    generator: self.identity.clone(),
                }),
                (None, Some(err)) => Err(err),
                (None, None) => Err(GeneratorError::Unavailable("recorded exchange is empty".into())),
            },
            Some(_) => Err(GeneratorError::Unavailable("prompt differs from the recording".into())),
            None => Err(GeneratorError::Unavailable("recording exhausted".into())),
        }
    }
}

/// Wraps a generator and keeps every exchange, so tests can check that no call
/// goes unrecorded.
#[derive(Debug)]
pub struct CallCounter<G> {
    inner: G,
    calls: AtomicUsize,
    log: Mutex<Vec<Exchange>>,
}

impl<G> CallCounter<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().expect("counter lock").clone()
    }
}

impl<G: TextGenerator> TextGenerator for CallCounter<G> {
    fn identity(&self) -> GeneratorIdentity {
        self.inner.identity()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, GeneratorError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let result = self.inner.complete(request);
        self.log.lock().expect("counter lock").push(Exchange {
            prompt: request.prompt.clone(),
            seed: request.seed,
            response: result.as_ref().ok().map(|r| r.text.clone()),
            error: result.as_ref().err().cloned(),
        });
        result
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Block {
    pub kind: String,
    pub fields: Vec<(String, String)>,
}

impl Block {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.fields
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, BlockError> {
        self.get(key)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| BlockError::MissingField {
                kind: self.kind.clone(),
                key: key.to_owned(),
            })
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("response contains no structured block")]
    NoBlocks,
    #[error("block {kind} lacks field {key}")]
    MissingField { kind: String, key: String },
    #[error("expected a {expected} block")]
    WrongKind { expected: String },
}

/// Parses every block in `text`.
pub fn parse_blocks(text: &str) -> Result<Vec<Block>, BlockError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if let Some(kind) = line.strip_prefix("## ") {
            blocks.push(Block {
                kind: kind.trim().to_owned(),
                fields: Vec::new(),
            });
            continue;
        }
        let syntax = |message: &str| BlockError::Syntax {
            line: i + 1,
            message: message.to_owned(),
        };
        let block = blocks
            .last_mut()
            .ok_or_else(|| syntax("text before the first block header"))?;
        let (key, value) = line
            .split_once(':')
            .filter(|(k, _)| !k.trim().is_empty() && !k.trim().contains(' '))
            .ok_or_else(|| syntax("expected `key: value`"))?;
        block
            .fields
            .push((key.trim().to_owned(), value.trim().to_owned()));
    }
    if blocks.is_empty() {
        return Err(BlockError::NoBlocks);
    }
    Ok(blocks)
}

/// Parses `text` and keeps only blocks of `kind`; at least one must be present.
pub fn blocks_of(text: &str, kind: &str) -> Result<Vec<Block>, BlockError> {
    let blocks: Vec<Block> = parse_blocks(text)?
        .into_iter()
        .filter(|b| b.kind == kind)
        .collect();
    if blocks.is_empty() {
        return Err(BlockError::WrongKind {
            expected: kind.to_owned(),
        });
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_is_pure() {
        let g = MockGenerator::new();
        let r = GenerationRequest::new("respond-with: backing", 7);
        assert_eq!(g.complete(&r).unwrap(), g.complete(&r).unwrap());
        let other = GenerationRequest::new("respond-with: backing", 8);
        assert_ne!(g.complete(&r).unwrap().text, g.complete(&other).unwrap().text);
    }

    #[test]
    fn blocks_parse() {
        let blocks = parse_blocks("## grounds\nevidence: e1\nevidence: e2\n\n## note\ntext: a: b\n").unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].all("evidence").collect::<Vec<_>>(), vec!["e1", "e2"]);
        assert_eq!(blocks[1].get("text"), Some("a: b"));
    }

    #[test]
    fn free_text_is_a_parse_failure() {
        assert_eq!(parse_blocks("Sure! Here you go."), Err(BlockError::Syntax {
            line: 1,
            message: "text before the first block header".into()
        }));
        assert_eq!(parse_blocks(""), Err(BlockError::NoBlocks));
    }

    #[test]
    fn replay_checks_prompts() {
        let g = ReplayGenerator::new(
            GeneratorIdentity::new("r", "1"),
            [Exchange { prompt: "p".into(), seed: 1, response: Some("x".into()), error: None }],
        );
        assert!(g.complete(&GenerationRequest::new("q", 1)).is_err());
    }
}
