//! Persistence, HTTP API and command line around the `knowloop` engine.

pub mod api;
pub mod cli;
pub mod problem;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use knowloop::generator::{MockGenerator, TextGenerator};

use crate::api::AppState;
use crate::store::Store;

/// Serves the API until `shutdown` resolves, then snapshots every model.
pub async fn serve(
    store: Store,
    generator: Arc<dyn TextGenerator>,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    let state = AppState::new(store, generator);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, api::router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.read().snapshot_all()?;
    Ok(())
}

/// The generator used when none is configured.
pub fn default_generator() -> Arc<dyn TextGenerator> {
    Arc::new(MockGenerator::new())
}
