//! Persistent event store: JSON-lines files in a data directory.
//!
//! ```text
//! <data>/audit.jsonl            one AuditEvent per line, gapless sequence
//! <data>/models.jsonl           {sequence, payload} for model payloads
//! <data>/justifications.jsonl   {sequence, payload} for justification payloads
//! <data>/snapshots/<model>/<version>.json   blueprint exports
//! ```
//!
//! Payload lines are written before the audit line that commits them, so a
//! crash between the two leaves an orphan payload, which is ignored on the
//! next start. Snapshots are checked against the replayed history; they never
//! replace replay.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use knowloop::engine::{Engine, EngineError, Event, Payload};
use knowloop::knowledge::{KnowledgeModel, ModelId};
use knowloop::ontology::{export_blueprint, import_blueprint};
use knowloop::workflow::{AuditEvent, Clock};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const AUDIT: &str = "audit.jsonl";
const MODELS: &str = "models.jsonl";
const JUSTIFICATIONS: &str = "justifications.jsonl";
const SNAPSHOTS: &str = "snapshots";

const PATH_SAFE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'+').remove(b'.');

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Corrupt {
        file: String,
        line: usize,
        message: String,
    },
    #[error("audit sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("snapshot {path} does not match the replayed model: {message}")]
    Snapshot { path: PathBuf, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl StoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Io { .. } => "io-error",
            StoreError::Engine(e) if !matches!(e, EngineError::Replay { .. }) => e.code(),
            _ => "corrupt-store",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PayloadLine {
    sequence: u64,
    #[serde(flatten)]
    payload: Payload,
}

fn is_model_payload(p: &Payload) -> bool {
    matches!(p, Payload::Model { .. } | Payload::Mutation { .. })
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            file: name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Committed events in sequence order, plus the number of orphan payloads
/// (written without their audit line) that were left out.
pub fn load_events(dir: &Path) -> Result<(Vec<Event>, usize), StoreError> {
    let audit: Vec<AuditEvent> = read_lines(&dir.join(AUDIT))?;
    for (i, e) in audit.iter().enumerate() {
        let expected = i as u64 + 1;
        if e.sequence != expected {
            return Err(StoreError::SequenceGap {
                expected,
                found: e.sequence,
            });
        }
    }
    let mut payloads: BTreeMap<u64, Payload> = BTreeMap::new();
    for file in [MODELS, JUSTIFICATIONS] {
        for (i, line) in read_lines::<PayloadLine>(&dir.join(file))?.into_iter().enumerate() {
            if payloads.insert(line.sequence, line.payload).is_some() {
                return Err(StoreError::Corrupt {
                    file: file.to_owned(),
                    line: i + 1,
                    message: format!("second payload for sequence {}", line.sequence),
                });
            }
        }
    }
    let events: Vec<Event> = audit
        .into_iter()
        .map(|audit| {
            let payload = payloads.remove(&audit.sequence);
            Event { audit, payload }
        })
        .collect();
    Ok((events, payloads.len()))
}

/// The directory holding blueprint snapshots of one model.
pub fn snapshot_dir(dir: &Path, model: &ModelId) -> PathBuf {
    let name = utf8_percent_encode(model.as_str(), PATH_SAFE).to_string();
    dir.join(SNAPSHOTS).join(name)
}

/// Model content at `version`, rebuilt from its genesis and mutations.
fn model_at(engine: &Engine, id: &ModelId, version: u64) -> Option<KnowledgeModel> {
    let entry = engine.entry(id)?;
    let start = entry.genesis.version();
    if version < start || version > entry.current.version() {
        return None;
    }
    let mut model = entry.genesis.clone();
    for m in entry.mutations.iter().take((version - start) as usize) {
        model = model.apply(m).ok()?;
    }
    Some(model)
}

fn verify_snapshots(dir: &Path, engine: &Engine) -> Result<usize, StoreError> {
    let mut checked = 0;
    for model in engine.models() {
        let sdir = snapshot_dir(dir, model.id());
        let entries = match fs::read_dir(&sdir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return Err(StoreError::io(&sdir, e)),
        };
        for entry in entries {
            let path = entry.map_err(|e| StoreError::io(&sdir, e))?.path();
            let fail = |message: String| StoreError::Snapshot {
                path: path.clone(),
                message,
            };
            let version: u64 = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| fail("file name is not a version number".into()))?;
            let text = fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))?;
            let snap = import_blueprint(&text).map_err(|e| fail(e.to_string()))?;
            let replayed = model_at(engine, model.id(), version)
                .ok_or_else(|| fail(format!("history has no version {version}")))?;
            if snap.content_hash() != replayed.content_hash() || snap.version() != version {
                return Err(fail(format!(
                    "hash {} differs from replayed {}",
                    snap.content_hash(),
                    replayed.content_hash()
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// An engine whose committed events are mirrored to disk.
pub struct Store {
    dir: PathBuf,
    engine: Engine,
    persisted: usize,
    snapshots_checked: usize,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("dir", &self.dir)
            .field("engine", &self.engine)
            .finish()
    }
}

impl Store {
    /// Opens (creating if needed) a data directory and replays it.
    pub fn open(dir: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(dir.join(SNAPSHOTS)).map_err(|e| StoreError::io(&dir, e))?;
        let (events, orphans) = load_events(&dir)?;
        let persisted = events.len();
        let engine = Engine::replay(events, clock)?;
        let snapshots_checked = verify_snapshots(&dir, &engine)?;
        let store = Self {
            dir,
            engine,
            persisted,
            snapshots_checked,
        };
        if orphans > 0 {
            tracing::warn!(orphans, "discarding payloads that were never committed");
            store.rewrite_payloads()?;
        }
        tracing::info!(events = persisted, snapshots_checked, "store replayed");
        Ok(store)
    }

    fn rewrite_payloads(&self) -> Result<(), StoreError> {
        for (file, models) in [(MODELS, true), (JUSTIFICATIONS, false)] {
            let mut text = String::new();
            for event in self.engine.events() {
                if let Some(payload) = event.payload.as_ref().filter(|p| is_model_payload(p) == models) {
                    let line = PayloadLine {
                        sequence: event.audit.sequence,
                        payload: payload.clone(),
                    };
                    text.push_str(&serde_json::to_string(&line).expect("payload serializes"));
                    text.push('\n');
                }
            }
            let path = self.dir.join(file);
            let tmp = self.dir.join(format!("{file}.tmp"));
            fs::write(&tmp, text).map_err(|e| StoreError::io(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| StoreError::io(&path, e))?;
        }
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn snapshots_checked(&self) -> usize {
        self.snapshots_checked
    }

    /// Runs a command on the engine and persists whatever events it committed.
    /// A failed command commits nothing.
    pub fn execute<T>(
        &mut self,
        command: impl FnOnce(&mut Engine) -> Result<T, EngineError>,
    ) -> Result<T, StoreError> {
        let result = command(&mut self.engine);
        self.flush()?;
        Ok(result?)
    }

    fn append_line(&self, file: &str, line: &str) -> Result<(), StoreError> {
        let path = self.dir.join(file);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::io(&path, e))?;
        writeln!(f, "{line}").map_err(|e| StoreError::io(&path, e))?;
        f.sync_data().map_err(|e| StoreError::io(&path, e))
    }

    fn flush(&mut self) -> Result<(), StoreError> {
        let pending: Vec<Event> = self.engine.events()[self.persisted..].to_vec();
        for event in pending {
            if let Some(payload) = &event.payload {
                let file = if is_model_payload(payload) { MODELS } else { JUSTIFICATIONS };
                let line = serde_json::to_string(&PayloadLine {
                    sequence: event.audit.sequence,
                    payload: payload.clone(),
                })
                .expect("payload serializes");
                self.append_line(file, &line)?;
            }
            let line = serde_json::to_string(&event.audit).expect("audit event serializes");
            self.append_line(AUDIT, &line)?;
            self.persisted += 1;
            if let Some(id) = event.audit.subject.model_id() {
                self.snapshot(id)?;
            }
        }
        Ok(())
    }

    /// Writes the blueprint of the model's current version if absent.
    pub fn snapshot(&self, id: &ModelId) -> Result<(), StoreError> {
        let Some(model) = self.engine.model(id) else {
            return Ok(());
        };
        let sdir = snapshot_dir(&self.dir, id);
        fs::create_dir_all(&sdir).map_err(|e| StoreError::io(&sdir, e))?;
        let path = sdir.join(format!("{}.json", model.version()));
        if path.exists() {
            return Ok(());
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, export_blueprint(model)).map_err(|e| StoreError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| StoreError::io(&path, e))
    }

    /// Snapshots every model; used on shutdown.
    pub fn snapshot_all(&self) -> Result<(), StoreError> {
        let ids: Vec<ModelId> = self.engine.models().map(|m| m.id().clone()).collect();
        ids.iter().try_for_each(|id| self.snapshot(id))
    }
}
