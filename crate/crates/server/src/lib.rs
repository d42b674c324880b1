//! HTTP service: tiles, evidence and analysis from one origin.

pub mod config;
pub mod error;
mod extract;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use fgis_core::store::{EvidenceStore, StoreError};
use fgis_core::tiles::{open_archive, TileArchive, TileError};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub use config::{is_intranet, ConfigError, ServiceConfig};
pub use error::ApiError;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<EvidenceStore>,
    pub tiles: Arc<TileArchive>,
    pub lenient_import: bool,
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("tile archive: {0}")]
    Tiles(#[from] TileError),
    #[error("evidence store: {0}")]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

impl AppState {
    /// Opens the archive and the store named in `config`.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServeError> {
        Ok(AppState {
            store: Arc::new(EvidenceStore::open(&config.case_root_path)?),
            tiles: Arc::new(open_archive(&config.tile_archive_path, config.cache_capacity)?),
            lenient_import: config.lenient_import,
        })
    }
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/health", get(routes::health))
        .route("/tiles/{z}/{x}/{y}", get(routes::tile))
        .route("/cases", get(routes::list_cases).post(routes::create_case))
        .route("/cases/{id}", get(routes::get_case))
        .route("/cases/{id}/import", post(routes::import))
        .route("/cases/{id}/layers", get(routes::list_layers))
        .route("/cases/{id}/layers/{lid}", get(routes::get_layer))
        .route("/cameras", get(routes::query_cameras))
        .route("/cameras/{id}", get(routes::get_camera))
        .route("/scans", get(routes::list_scans))
        .route("/scans/{id}", get(routes::get_scan))
        .route("/tracks", get(routes::list_tracks))
        .route("/tracks/{id}", get(routes::get_track))
        .route("/analysis/scan-diff", post(routes::scan_diff))
        .route("/analysis/bssid/{query}", get(routes::bssid_search))
        .route("/analysis/presence", post(routes::presence))
        .route("/analysis/correlate", post(routes::correlate))
        .route("/analysis/stops", post(routes::stops))
        .method_not_allowed_fallback(routes::wrong_method)
        .layer(DefaultBodyLimit::max(config.max_upload_mb.saturating_mul(1024 * 1024)))
        .with_state(state);
    match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).not_found_service(get(routes::no_route).with_state(()))),
        None => api.route("/", get(routes::placeholder)).fallback(routes::no_route),
    }
}

/// A bound listener with its application, ready to serve.
pub struct Bound {
    pub listener: TcpListener,
    pub app: Router,
}

impl Bound {
    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        axum::serve(self.listener, self.app).with_graceful_shutdown(shutdown).await?;
        Ok(())
    }
}

/// Validates `config`, opens storage and binds the configured address.
/// Binding uses the parsed IP address, so no name lookup happens.
pub async fn bind(config: &ServiceConfig) -> Result<Bound, ServeError> {
    config.validate()?;
    let state = AppState::open(config)?;
    let addr = config.socket_addr();
    let listener = TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    Ok(Bound { listener, app: router(state, config) })
}

/// Runs until Ctrl-C or SIGTERM.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServeError> {
    let bound = bind(config).await?;
    let addr = bound.local_addr()?;
    tracing::info!(%addr, "listening");
    println!("fgis listening on http://{addr}");
    bound.run(shutdown_signal()).await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
