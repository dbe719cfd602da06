//! Experiment host for robovoice: an event-sourced store with one log per
//! experiment, the `/v1` HTTP API, a content-addressed audio cache and the
//! functions behind the `robovoice` command line.

pub mod agents;
pub mod api;
pub mod cli;
pub mod engine;
pub mod error;
pub mod inputs;
pub mod manifest;
pub mod prediction;
pub mod render;
pub mod store;
pub mod views;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::router;
pub use error::{ApiError, ApiResult};
pub use manifest::{ExperimentKind, Manifest, StimulusRef};
pub use render::{RenderCache, RenderJob};
pub use store::{replay_log, Clock, ExperimentState, ManualClock, Store, StoreOptions, SystemClock};

/// Serve `store` on `addr` until ctrl-c, then snapshot every experiment.
pub async fn serve(store: Arc<Store>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    store.snapshot_all()?;
    Ok(())
}
