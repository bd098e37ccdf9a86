//! HTTP service over a periodically reloaded snapshot.
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/api/v1/regions` | regions in the current snapshot |
//! | POST | `/api/v1/risk` | one assessment |
//! | GET  | `/api/v1/simulate` | assessments over a date range |
//! | POST | `/api/v1/reload` | reload now (bearer token) |
//! | GET  | `/healthz` | snapshot status |

pub mod api;
pub mod config;
pub mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use covarc_core::ingest::LoadOptions;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use api::AppState;
pub use config::{ConfigError, ServiceConfig};
pub use store::SnapshotStore;

/// The API routes alone.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/regions", get(api::regions))
        .route("/api/v1/risk", post(api::risk))
        .route("/api/v1/simulate", get(api::simulate))
        .route("/api/v1/reload", post(api::reload))
        .route("/healthz", get(api::healthz))
        .with_state(state)
}

/// Routes plus static files, CORS and request logging as configured.
pub fn app(state: AppState, config: &ServiceConfig) -> Result<Router, ConfigError> {
    let mut app = router(state);
    app = match &config.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(api::not_found),
    };
    if !config.allowed_origins.is_empty() {
        let origins = config
            .allowed_origins
            .iter()
            .map(|o| {
                HeaderValue::from_str(o).map_err(|_| ConfigError::Invalid {
                    field: "allowed_origins",
                    message: format!("'{o}' is not a valid origin"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]),
        );
    }
    Ok(app.layer(axum::middleware::from_fn(api::log_request)))
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub async fn bind(config: &ServiceConfig) -> Result<TcpListener, ServeError> {
    let addr = config.listen_addr()?;
    TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })
}

/// Serve on `listener` until `shutdown` resolves, then finish in-flight
/// requests and return.
///
/// A failed first load is logged and retried on the reload timer; until
/// one succeeds the data endpoints answer 503.
pub async fn serve(
    listener: TcpListener,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let options = LoadOptions {
        builtin_tables_fallback: config.builtin_tables_fallback,
    };
    let store = Arc::new(SnapshotStore::new(config.snapshot_dir.clone(), options));
    if let Err(e) = store.reload().await {
        tracing::error!(error = %e, "initial snapshot load failed");
    }
    let state = AppState {
        store: store.clone(),
        risk: config.risk,
        reload_token: config.reload_token.clone(),
    };
    let app = app(state, &config)?;

    let timer = (config.reload_secs > 0).then(|| {
        let store = store.clone();
        let period = Duration::from_secs(config.reload_secs);
        tokio::spawn(async move {
            let mut ticks = tokio::time::interval(period);
            ticks.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            ticks.tick().await;
            loop {
                ticks.tick().await;
                if let Err(e) = store.reload().await {
                    tracing::error!(error = %e, "snapshot reload failed; keeping the previous snapshot");
                }
            }
        })
    });

    tracing::info!(addr = %listener.local_addr()?, "listening");
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    if let Some(t) = timer {
        t.abort();
    }
    result.map_err(ServeError::from)
}
