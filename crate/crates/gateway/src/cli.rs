//! Command line. Every command except `serve` runs once and exits:
//! 0 on success, 1 on error, 2 when a merge has unresolved conflicts.
//! Errors are a single line on stderr.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use knowloop::engine::EngineError;
use knowloop::eval::{embedded_ratings, emit_report, evaluate, load_ratings};
use knowloop::generator::MockGenerator;
use knowloop::justification::{JustificationRequest, VerdictInput};
use knowloop::knowledge::{KnowledgeModel, MergeError, ModelId, Resolution};
use knowloop::ontology::{export_blueprint, export_rdfxml, import_blueprint, import_rdfxml};
use knowloop::workflow::{consistency_check, Principal, Severity, SystemClock, WorkflowState};

use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "knowloop", version, about = "Knowledge models, audited workflow and justified decisions")]
pub struct Cli {
    /// Data directory of the event store.
    #[arg(long, global = true, env = "KNOWLOOP_DATA", default_value = "knowloop-data")]
    pub data: PathBuf,
    /// Acting principal as `id;role,role`.
    #[arg(long, global = true, env = "KNOWLOOP_PRINCIPAL")]
    pub principal: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Rdfxml,
    Blueprint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerdictArg {
    Approve,
    Reject,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import an RDF/XML or blueprint document into the store as a Draft model.
    Import {
        file: PathBuf,
        /// Defaults to the file extension (.rdf/.owl/.xml or .json).
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, default_value = "")]
        rationale: String,
    },
    /// Print a stored model, or convert a model file, in the given format.
    Export {
        /// Stored model id.
        model: Option<String>,
        /// Read the model from a document instead of the store.
        #[arg(long, conflicts_with = "model")]
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "blueprint")]
        format: Format,
    },
    /// Merge two stored models into a new Draft model.
    Merge {
        left: String,
        right: String,
        /// JSON array of resolutions.
        #[arg(long)]
        resolutions: Option<PathBuf>,
        #[arg(long, default_value = "")]
        rationale: String,
    },
    /// Run the consistency check; exits 1 if it reports errors.
    Check {
        model: Option<String>,
        #[arg(long, conflicts_with = "model")]
        file: Option<PathBuf>,
    },
    /// Move a stored model to another workflow state.
    Transition {
        model: String,
        target: String,
        #[arg(long)]
        rationale: String,
    },
    /// Compose a justification from a JSON request and run the decision gate.
    Justify {
        request: PathBuf,
        #[arg(long, value_enum, requires = "rationale")]
        verdict: Option<VerdictArg>,
        #[arg(long, default_value = "")]
        rationale: String,
    },
    /// Print the ratings evaluation report.
    Evaluate {
        /// `embedded` or a CSV path.
        #[arg(long, default_value = "embedded")]
        ratings: String,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub exit: u8,
    pub message: String,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            exit: 1,
            message: e.to_string(),
        }
    }
}

fn fail(message: impl Into<String>) -> Failure {
    Failure {
        exit: 1,
        message: message.into(),
    }
}

fn principal(cli: &Cli) -> Result<Principal, Failure> {
    let header = cli
        .principal
        .as_deref()
        .ok_or_else(|| fail("--principal (or KNOWLOOP_PRINCIPAL) is required for this command"))?;
    Ok(Principal::parse_header(header)?)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn guess_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Blueprint,
        _ => Format::Rdfxml,
    }
}

fn load_file(path: &Path, format: Option<Format>) -> Result<KnowledgeModel, Failure> {
    let text = read(path)?;
    Ok(match format.unwrap_or_else(|| guess_format(path)) {
        Format::Rdfxml => import_rdfxml(&text)?.model,
        Format::Blueprint => import_blueprint(&text)?,
    })
}

fn open(cli: &Cli) -> Result<Store, Failure> {
    Ok(Store::open(&cli.data, Arc::new(SystemClock))?)
}

fn stored(store: &Store, id: &str) -> Result<KnowledgeModel, Failure> {
    store
        .engine()
        .model(&ModelId::new(id))
        .cloned()
        .ok_or_else(|| fail(format!("no model {id} in the store")))
}

fn render(model: &KnowledgeModel, format: Format) -> Result<String, Failure> {
    Ok(match format {
        Format::Rdfxml => export_rdfxml(model)?,
        Format::Blueprint => export_blueprint(model),
    })
}

/// Runs a non-serve command, writing its output to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Import {
            file,
            format,
            rationale,
        } => {
            let p = principal(cli)?;
            let model = load_file(file, *format)?;
            let mut store = open(cli)?;
            let m = store.execute(|e| e.import_model(&p, model, rationale).cloned())?;
            writeln!(out, "imported {} v{} ({} classes)", m.id(), m.version(), m.classes().count())?;
        }
        Command::Export {
            model,
            file,
            format,
        } => {
            let m = match (model, file) {
                (_, Some(f)) => load_file(f, None)?,
                (Some(id), None) => stored(&open(cli)?, id)?,
                (None, None) => return Err(fail("give a model id or --file")),
            };
            write!(out, "{}", render(&m, *format)?)?;
        }
        Command::Merge {
            left,
            right,
            resolutions,
            rationale,
        } => {
            let p = principal(cli)?;
            let resolutions: Vec<Resolution> = match resolutions {
                Some(path) => serde_json::from_str(&read(path)?)?,
                None => Vec::new(),
            };
            let mut store = open(cli)?;
            let (l, r) = (ModelId::new(left.as_str()), ModelId::new(right.as_str()));
            match store.execute(|e| e.merge(&p, &l, &r, &resolutions, rationale).cloned()) {
                Ok(m) => writeln!(out, "merged into {} v{}", m.id(), m.version())?,
                Err(crate::store::StoreError::Engine(EngineError::Merge(
                    MergeError::UncoveredConflicts(conflicts),
                ))) => {
                    for (i, c) in conflicts.iter().enumerate() {
                        writeln!(out, "conflict {i}: {c}")?;
                    }
                    return Err(Failure {
                        exit: 2,
                        message: format!("{} unresolved conflict(s)", conflicts.len()),
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Check { model, file } => {
            let m = match (model, file) {
                (_, Some(f)) => load_file(f, None)?,
                (Some(id), None) => stored(&open(cli)?, id)?,
                (None, None) => return Err(fail("give a model id or --file")),
            };
            let report = consistency_check(&m);
            for issue in &report.issues {
                let level = match issue.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                writeln!(out, "{level}: {}", issue.finding)?;
            }
            if report.has_errors() {
                return Err(fail(format!("{} is inconsistent", m.id())));
            }
            writeln!(out, "{} v{}: consistent", m.id(), m.version())?;
        }
        Command::Transition {
            model,
            target,
            rationale,
        } => {
            let p = principal(cli)?;
            let target: WorkflowState = target.parse()?;
            let mut store = open(cli)?;
            let id = ModelId::new(model.as_str());
            let m = store.execute(|e| e.transition(&p, &id, target, rationale).cloned())?;
            writeln!(out, "{} v{} is {}", m.id(), m.version(), m.state().as_str())?;
        }
        Command::Justify {
            request,
            verdict,
            rationale,
        } => {
            let p = principal(cli)?;
            let mut value: serde_json::Value = serde_json::from_str(&read(request)?)?;
            if let Some(obj) = value.as_object_mut() {
                obj.entry("created-by")
                    .or_insert_with(|| serde_json::json!(p.id.as_str()));
            }
            let request: JustificationRequest = serde_json::from_value(value)?;
            let verdict = verdict.map(|v| match v {
                VerdictArg::Approve => VerdictInput::approve(p.clone(), rationale.clone()),
                VerdictArg::Reject => VerdictInput::reject(p.clone(), rationale.clone()),
            });
            let mut store = open(cli)?;
            let generator = MockGenerator::new();
            let id = store.execute(|e| e.compose(&p, &request, &generator).map(|r| r.id.clone()))?;
            store.execute(|e| e.gate(&id, verdict.as_ref()))?;
            let record = store.engine().justification(&id).expect("just composed");
            writeln!(out, "{}", serde_json::to_string_pretty(record)?)?;
        }
        Command::Evaluate { ratings, json } => {
            let records = if ratings == "embedded" {
                embedded_ratings()
            } else {
                let path = Path::new(ratings);
                let file = fs::File::open(path).map_err(|e| fail(format!("{ratings}: {e}")))?;
                load_ratings(file)?
            };
            let report = emit_report(&evaluate(&records)?);
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report.json)?)?;
            } else {
                write!(out, "{}", report.text)?;
            }
        }
        Command::Serve { .. } => return Err(fail("serve is handled by the binary")),
    }
    Ok(())
}
