//! HTTP routes of the server.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::Notify;
use tower_http::services::ServeDir;

use crate::api::{
    ApiError, HealthResponse, QueryRequest, QueryResponse, RunOptions, HEALTH_PATH, QUERY_PATH, RELOAD_PATH,
    SCHEMA_PATH, SITES_PATH, VIEWS_PATH,
};
use crate::config::ServerConfig;
use crate::state::Mdbs;
use crate::ServerError;

/// HTTP status for a stable error kind.
pub fn status_for(kind: &str) -> StatusCode {
    match kind {
        "STALE_MAPPING" => StatusCode::CONFLICT,
        "UNKNOWN_SITE" => StatusCode::NOT_FOUND,
        "SITE_UNAVAILABLE" | "PARTIAL_UNSUPPORTED" => StatusCode::SERVICE_UNAVAILABLE,
        "SCHEMA_DRIFT" => StatusCode::BAD_GATEWAY,
        "INVALID_CATALOG" => StatusCode::UNPROCESSABLE_ENTITY,
        "CONFIG_ERROR" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

fn answer(resp: QueryResponse) -> Response {
    let code = resp.error.as_ref().map_or(StatusCode::OK, |e| status_for(&e.kind));
    (code, Json(resp)).into_response()
}

fn fail(e: ApiError) -> Response {
    answer(QueryResponse::failed(e))
}

fn ok<T: Serialize>(body: T) -> Response {
    Json(body).into_response()
}

fn bad_body(r: JsonRejection) -> Response {
    fail(ApiError::new("BAD_REQUEST", r.body_text()))
}

async fn query(State(m): State<Arc<Mdbs>>, body: Result<Json<QueryRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(req)) => answer(m.query(&req).await),
        Err(r) => bad_body(r),
    }
}

async fn site_schema(State(m): State<Arc<Mdbs>>, Path(id): Path<String>) -> Response {
    match m.site_schema(&id).await {
        Ok(ls) => ok(ls),
        Err(e) => fail(e),
    }
}

async fn run_view(
    State(m): State<Arc<Mdbs>>,
    Path(name): Path<String>,
    body: Option<Json<RunOptions>>,
) -> Response {
    answer(m.run_view(&name, body.map(|Json(o)| o).unwrap_or_default()).await)
}

async fn reload(State(m): State<Arc<Mdbs>>) -> Response {
    match m.reload().await {
        Ok(r) => ok(r),
        Err(e) => {
            tracing::warn!("reload refused: {e}");
            fail(e.to_api())
        }
    }
}

pub fn router(m: Arc<Mdbs>) -> Router {
    let console = m.config().console.clone();
    let r = Router::new()
        .route(QUERY_PATH, post(query))
        .route(SCHEMA_PATH, get(|State(m): State<Arc<Mdbs>>| async move { ok(m.schema()) }))
        .route(SITES_PATH, get(|State(m): State<Arc<Mdbs>>| async move { ok(m.sites().await) }))
        .route(&format!("{SITES_PATH}/{{id}}/schema"), get(site_schema))
        .route(VIEWS_PATH, get(|State(m): State<Arc<Mdbs>>| async move { ok(m.views()) }))
        .route(&format!("{VIEWS_PATH}/{{name}}/run"), post(run_view))
        .route(RELOAD_PATH, post(reload))
        .route(
            HEALTH_PATH,
            get(|State(m): State<Arc<Mdbs>>| async move {
                ok(HealthResponse { status: "ok".into(), catalog_version: m.snapshot().catalog.version })
            }),
        )
        .with_state(m);
    match console {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r,
    }
}

/// A bound, running server.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: Arc<Mdbs>,
    shutdown: Arc<Notify>,
    task: tokio::task::JoinHandle<()>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting and closes idle connections.
    pub fn stop(&self) {
        self.shutdown.notify_one();
    }

    /// Resolves when the server has stopped.
    pub async fn stopped(mut self) {
        self.shutdown.notify_one();
        let _ = (&mut self.task).await;
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.shutdown.notify_one();
        self.task.abort();
    }
}

/// Serves an already started server state on `listen`.
pub async fn serve_state(m: Arc<Mdbs>, listen: &str) -> Result<RunningServer, ServerError> {
    let bind = |e: std::io::Error| ServerError::Bind { addr: listen.to_string(), detail: e.to_string() };
    let listener = tokio::net::TcpListener::bind(listen).await.map_err(bind)?;
    let addr = listener.local_addr().map_err(bind)?;
    let shutdown = Arc::new(Notify::new());
    let signal = shutdown.clone();
    let app = router(m.clone());
    let task = tokio::spawn(async move {
        let served = axum::serve(listener, app).with_graceful_shutdown(async move { signal.notified().await });
        if let Err(e) = served.await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok(RunningServer { addr, state: m, shutdown, task })
}

/// Loads the catalog, connects the sites and starts serving. Refuses to
/// start on an invalid catalog.
pub async fn serve(config: ServerConfig) -> Result<RunningServer, ServerError> {
    let listen = config.listen.clone();
    let m = Mdbs::start(config).await?;
    serve_state(m, &listen).await
}
