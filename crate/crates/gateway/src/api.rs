//! HTTP routes. Reads take a shared lock on the store; every write goes
//! through the store's single write lock, so each successful mutating
//! request commits its events in one serialized step.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use knowloop::eval::{embedded_ratings, emit_report, evaluate, load_ratings_str};
use knowloop::generator::TextGenerator;
use knowloop::justification::{
    export_provenance, GateOutcome, JustificationRecord, JustificationRequest, Status, Verdict,
    VerdictInput,
};
use knowloop::knowledge::{KnowledgeModel, ModelId, Mutation, Resolution, SourceRef};
use knowloop::ontology::{export_blueprint, export_rdfxml, import_blueprint, import_rdfxml};
use knowloop::workflow::{AuditEvent, AuditFilter, Principal, SubjectFilter, WorkflowState};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::problem::{render_problems, ApiError};
use crate::store::Store;

pub const PRINCIPAL_HEADER: &str = "x-principal";

pub struct AppState {
    store: RwLock<Store>,
    generator: Arc<dyn TextGenerator>,
}

impl AppState {
    pub fn new(store: Store, generator: Arc<dyn TextGenerator>) -> Arc<Self> {
        Arc::new(Self {
            store: RwLock::new(store),
            generator,
        })
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Store> {
        self.store.write().unwrap_or_else(|e| e.into_inner())
    }
}

type Shared = Arc<AppState>;
type ApiResult<T = Response> = Result<T, ApiError>;

/// The principal asserted by the `X-Principal: id;role,role` header.
pub struct Actor(pub Principal);

#[axum::async_trait]
impl<S: Send + Sync> FromRequestParts<S> for Actor {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, ApiError> {
        let value = parts
            .headers
            .get(PRINCIPAL_HEADER)
            .ok_or_else(|| ApiError::coded("missing-principal", "X-Principal header is required"))?
            .to_str()
            .map_err(|_| ApiError::coded("malformed-principal", "X-Principal is not valid text"))?;
        Principal::parse_header(value)
            .map(Actor)
            .map_err(|e| ApiError::coded(e.code(), e.to_string()))
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(format!("body at {path}: {}", e.inner()))
    })
}

fn unknown_model(id: &str) -> ApiError {
    ApiError::not_found("unknown-model", format!("no model {id}"))
}

fn unknown_justification(id: &str) -> ApiError {
    ApiError::not_found("unknown-justification", format!("no justification {id}"))
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct ModelSummary {
    id: ModelId,
    name: String,
    version: u64,
    state: WorkflowState,
    classes: usize,
    relationships: usize,
    content_hash: String,
}

fn summary(m: &KnowledgeModel) -> ModelSummary {
    ModelSummary {
        id: m.id().clone(),
        name: m.name().to_owned(),
        version: m.version(),
        state: m.state(),
        classes: m.classes().count(),
        relationships: m.relationships().count(),
        content_hash: m.content_hash(),
    }
}

fn model_view(m: &KnowledgeModel) -> Value {
    json!({
        "content-hash": m.content_hash(),
        "model": m.clone().into_parts(),
    })
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/models", get(list_models).post(create_model))
        .route("/models/:id", get(get_model))
        .route("/models/:id/mutations", post(mutate_model))
        .route("/models/:id/merge", post(merge_model))
        .route("/models/:id/transition", post(transition_model))
        .route("/models/:id/audit", get(model_audit))
        .route("/models/:id/export", get(export_model))
        .route("/audit", get(full_audit))
        .route("/import", post(import_model))
        .route("/justifications", get(list_justifications).post(compose))
        .route("/justifications/:id", get(get_justification))
        .route("/justifications/:id/verdict", post(verdict))
        .route("/justifications/:id/prov", get(provenance))
        .route("/evaluate", post(evaluate_ratings))
        .fallback(|| async { ApiError::not_found("not-found", "no such route") })
        .layer(axum::middleware::from_fn(render_problems))
        .with_state(state)
}

async fn list_models(State(s): State<Shared>) -> Json<Vec<ModelSummary>> {
    Json(s.read().engine().models().map(summary).collect())
}

async fn get_model(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let store = s.read();
    let model = store
        .engine()
        .model(&ModelId::new(id.clone()))
        .ok_or_else(|| unknown_model(&id))?;
    Ok(Json(model_view(model)))
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct CreateModel {
    name: String,
    #[serde(default)]
    id: Option<ModelId>,
    source: SourceRef,
}

async fn create_model(State(s): State<Shared>, Actor(p): Actor, body: Bytes) -> ApiResult {
    let body: CreateModel = parse_body(&body)?;
    let view = s.write().execute(|e| {
        e.create_model(&p, body.id, &body.name, body.source)
            .map(model_view)
    })?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct MutateBody {
    mutation: Mutation,
    #[serde(default)]
    rationale: String,
}

async fn mutate_model(
    State(s): State<Shared>,
    Actor(p): Actor,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let body: MutateBody = parse_body(&body)?;
    let id = ModelId::new(id);
    let view = s
        .write()
        .execute(|e| e.mutate(&p, &id, body.mutation, &body.rationale).map(model_view))?;
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct MergeBody {
    with: ModelId,
    #[serde(default)]
    resolutions: Vec<Resolution>,
    #[serde(default)]
    rationale: String,
}

async fn merge_model(
    State(s): State<Shared>,
    Actor(p): Actor,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let body: MergeBody = parse_body(&body)?;
    let left = ModelId::new(id);
    let view = s.write().execute(|e| {
        e.merge(&p, &left, &body.with, &body.resolutions, &body.rationale)
            .map(model_view)
    })?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct TransitionBody {
    target: String,
    rationale: String,
}

async fn transition_model(
    State(s): State<Shared>,
    Actor(p): Actor,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let body: TransitionBody = parse_body(&body)?;
    let target: WorkflowState = body
        .target
        .parse()
        .map_err(|e: knowloop::workflow::WorkflowError| ApiError::coded(e.code(), e.to_string()))?;
    let id = ModelId::new(id);
    let view = s
        .write()
        .execute(|e| e.transition(&p, &id, target, &body.rationale).map(model_view))?;
    Ok(Json(view))
}

#[derive(Deserialize, Default)]
struct Window {
    from: Option<DateTime<Utc>>,
    until: Option<DateTime<Utc>>,
}

async fn model_audit(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(w): Query<Window>,
) -> ApiResult<Json<Vec<AuditEvent>>> {
    let store = s.read();
    let id = ModelId::new(id);
    if store.engine().model(&id).is_none() {
        return Err(unknown_model(id.as_str()));
    }
    Ok(Json(store.engine().trail(&AuditFilter {
        subject: SubjectFilter::Model(id),
        from: w.from,
        until: w.until,
    })))
}

async fn full_audit(State(s): State<Shared>, Query(w): Query<Window>) -> Json<Vec<AuditEvent>> {
    Json(s.read().engine().trail(&AuditFilter {
        subject: SubjectFilter::Any,
        from: w.from,
        until: w.until,
    }))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export_model(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult {
    let store = s.read();
    let model = store
        .engine()
        .model(&ModelId::new(id.clone()))
        .ok_or_else(|| unknown_model(&id))?;
    match q.format.as_deref().unwrap_or("blueprint") {
        "blueprint" => Ok(([(header::CONTENT_TYPE, "application/json")], export_blueprint(model))
            .into_response()),
        "rdfxml" => {
            let doc = export_rdfxml(model).map_err(|e| ApiError::coded(e.code(), e.to_string()))?;
            Ok(([(header::CONTENT_TYPE, "application/rdf+xml")], doc).into_response())
        }
        other => Err(ApiError::bad_request(format!(
            "unknown format {other}; expected rdfxml or blueprint"
        ))),
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ImportBody {
    format: String,
    document: String,
    #[serde(default)]
    rationale: String,
}

async fn import_model(State(s): State<Shared>, Actor(p): Actor, body: Bytes) -> ApiResult {
    let body: ImportBody = parse_body(&body)?;
    let ontology = |e: knowloop::ontology::OntologyError| ApiError::coded(e.code(), e.to_string());
    let (model, skipped) = match body.format.as_str() {
        "rdfxml" => {
            let imported = import_rdfxml(&body.document).map_err(ontology)?;
            (imported.model, imported.skipped)
        }
        "blueprint" => (import_blueprint(&body.document).map_err(ontology)?, Vec::new()),
        other => {
            return Err(ApiError::bad_request(format!(
                "unknown format {other}; expected rdfxml or blueprint"
            )))
        }
    };
    let mut view = s
        .write()
        .execute(|e| e.import_model(&p, model, &body.rationale).map(model_view))?;
    view["skipped"] = json!(skipped);
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

#[derive(Deserialize)]
struct StatusQuery {
    status: Option<String>,
}

async fn list_justifications(
    State(s): State<Shared>,
    Query(q): Query<StatusQuery>,
) -> ApiResult<Json<Vec<JustificationRecord>>> {
    let status: Option<Status> = q
        .status
        .map(|s| s.parse())
        .transpose()
        .map_err(|_| ApiError::bad_request("status must be proposed, approved, rejected or recorded"))?;
    let store = s.read();
    Ok(Json(
        store
            .engine()
            .justifications()
            .filter(|r| status.is_none_or(|st| r.status == st))
            .cloned()
            .collect(),
    ))
}

async fn get_justification(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<JustificationRecord>> {
    let store = s.read();
    let record = store
        .engine()
        .justification(&id)
        .ok_or_else(|| unknown_justification(&id))?;
    Ok(Json(record.clone()))
}

async fn compose(State(s): State<Shared>, Actor(p): Actor, body: Bytes) -> ApiResult {
    let mut value: Value = parse_body(&body)?;
    if let Some(obj) = value.as_object_mut() {
        obj.entry("created-by").or_insert_with(|| json!(p.id.as_str()));
    }
    let request: JustificationRequest = parse_body(value.to_string().as_bytes())?;
    let generator = s.generator.clone();
    let record = s
        .write()
        .execute(|e| e.compose(&p, &request, generator.as_ref()).cloned())?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct VerdictBody {
    #[serde(default)]
    verdict: Option<Verdict>,
    #[serde(default)]
    rationale: String,
    #[serde(default)]
    accepted_rebuttals: Vec<String>,
}

/// With a verdict, a human decides. Without one, a low-risk record is
/// recorded and a high-risk one stays pending (202).
async fn verdict(
    State(s): State<Shared>,
    Actor(p): Actor,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let body: VerdictBody = if body.iter().all(u8::is_ascii_whitespace) {
        VerdictBody::default()
    } else {
        parse_body(&body)?
    };
    let input = body.verdict.map(|v| {
        let input = match v {
            Verdict::Approve => VerdictInput::approve(p.clone(), body.rationale.clone()),
            Verdict::Reject => VerdictInput::reject(p.clone(), body.rationale.clone()),
        };
        input.accepting(body.accepted_rebuttals.clone())
    });
    let outcome = s.write().execute(|e| e.gate(&id, input.as_ref()))?;
    Ok(match outcome {
        GateOutcome::PendingHuman => (
            StatusCode::ACCEPTED,
            Json(json!({"outcome": "pending-human", "justification": id})),
        )
            .into_response(),
        GateOutcome::Decided(record) => Json(record).into_response(),
    })
}

async fn provenance(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult {
    let store = s.read();
    let record = store
        .engine()
        .justification(&id)
        .ok_or_else(|| unknown_justification(&id))?;
    let doc = export_provenance(record).map_err(|e| ApiError::coded("not-terminal", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], doc.to_json()).into_response())
}

/// Accepts a ratings CSV; an empty body evaluates the bundled ratings.
async fn evaluate_ratings(body: Bytes) -> ApiResult<Json<Value>> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let records = if text.trim().is_empty() {
        embedded_ratings()
    } else {
        load_ratings_str(text).map_err(|e| ApiError::coded(e.code(), e.to_string()))?
    };
    let evaluation = evaluate(&records).map_err(|e| ApiError::coded(e.code(), e.to_string()))?;
    let report = emit_report(&evaluation);
    let mut out = BTreeMap::new();
    out.insert("report", report.json);
    out.insert("text", Value::String(report.text));
    Ok(Json(json!(out)))
}
