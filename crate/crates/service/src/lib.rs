//! HTTP/JSON front for live campaigns: an expert labels queued pairs, the
//! campaign advances when its queue drains, and telemetry is read-only.
//!
//! Campaign data lives under one directory per campaign in the data
//! directory; on start the service resumes every campaign it finds there.

mod error;
mod registry;
mod routes;

use std::net::SocketAddr;

pub use error::ApiError;
pub use registry::{depiction_url, AppState, ServiceConfig, SessionDescriptor};
pub use routes::{router, Choice, LabelRequest, IDEMPOTENCY_HEADER};

/// Recovers stored campaigns, then serves until interrupted.
pub async fn serve(cfg: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(cfg).map_err(std::io::Error::other)?;
    let n = state.recover().map_err(std::io::Error::other)?;
    log::info!("recovered {n} campaign(s) from {}", state.data_dir().display());
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweeper.config().sweep_interval);
        loop {
            tick.tick().await;
            sweeper.sweep().await;
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
