//! Drives the HTTP API in-process: import a model, compose a high-risk
//! justification, and approve it with an operator principal.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use knowloop::fixtures::{animal_model, outage_request};
use knowloop::justification::RiskTier;
use knowloop::ontology::export_blueprint;
use knowloop::workflow::StepClock;
use knowloop_gateway::api::{router, AppState};
use knowloop_gateway::store::Store;
use serde_json::json;
use tower::ServiceExt;

async fn send(app: &axum::Router, method: &str, uri: &str, principal: &str, body: serde_json::Value) -> String {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("X-Principal", principal)
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    format!("{status} {}", String::from_utf8_lossy(&bytes))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("knowloop-api-{}", std::process::id()));
    let store = Store::open(&dir, Arc::new(StepClock::default()))?;
    let app = router(AppState::new(store, knowloop_gateway::default_generator()));

    let doc = export_blueprint(&animal_model());
    let r = send(&app, "POST", "/import", "alice;contributor", json!({"format": "blueprint", "document": doc})).await;
    println!("import: {}", &r[..r.len().min(80)]);

    let r = send(&app, "POST", "/models", "bob;reviewer", json!({"name": "Plants", "source": "doc:x"})).await;
    println!("reviewer creating a model: {r}");

    let request = serde_json::to_value(outage_request(RiskTier::High))?;
    let r = send(&app, "POST", "/justifications", "olga;operator", request).await;
    println!("compose: {}", &r[..r.len().min(80)]);
    let r = send(&app, "POST", "/justifications/j-1/verdict", "olga;operator", json!({})).await;
    println!("no verdict: {r}");
    let r = send(
        &app,
        "POST",
        "/justifications/j-1/verdict",
        "olga;operator",
        json!({"verdict": "approve", "rationale": "evidence checked"}),
    )
    .await;
    println!("approve: {}", &r[..r.len().min(80)]);

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
