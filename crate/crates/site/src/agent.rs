//! The site agent: firewall, single-writer serialization, and the HTTP/JSON
//! wire protocol the multidatabase server speaks to each site.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mdbs_core::catalog::{AdapterKind, LocalClassDef, LocalSchemaDescriptor};
use mdbs_core::decompose::{SubQuery, SubWrite};
use mdbs_core::exec::Row;
use mdbs_core::Ident;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{open_adapter, Adapter, AdapterError};
use crate::firewall::{firewall_decide, Action, FirewallPolicy, Operation, Principals};

pub const SUBQUERY_PATH: &str = "/agent/v1/subquery";
pub const WRITE_PATH: &str = "/agent/v1/write";
pub const SCHEMA_PATH: &str = "/agent/v1/schema";
pub const PRINCIPAL_HEADER: &str = "X-MDBS-Principal";
pub const TOKEN_HEADER: &str = "X-MDBS-Token";

/// Principal name under which the multidatabase server calls agents.
pub const SERVER_PRINCIPAL: &str = "mdbs-server";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AgentPayload {
    Subquery(SubQuery),
    Write(SubWrite),
    SchemaProbe,
}

impl AgentPayload {
    pub fn operation(&self) -> Operation {
        match self {
            AgentPayload::Subquery(_) => Operation::Read,
            AgentPayload::Write(_) => Operation::Write,
            AgentPayload::SchemaProbe => Operation::Schema,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRequest {
    pub principal: Option<String>,
    pub token: Option<String>,
    pub payload: AgentPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseStatus {
    Ok,
    Denied,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Row>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affected: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_casts: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<LocalSchemaDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AgentResponse {
    fn empty(status: ResponseStatus) -> Self {
        AgentResponse { status, rows: None, affected: None, skipped_casts: None, schema: None, error: None }
    }

    fn failed(status: ResponseStatus, error: String) -> Self {
        AgentResponse { error: Some(error), ..Self::empty(status) }
    }
}

/// What the agent does with a request. `Silence` means nothing is ever sent.
#[derive(Debug, Clone, PartialEq)]
pub enum Handled {
    Reply(AgentResponse),
    Silence,
}

/// A site's adapter behind its firewall.
pub struct SiteAgent {
    pub site: Ident,
    pub policy: FirewallPolicy,
    pub principals: Principals,
    adapter: Arc<dyn Adapter>,
    writer: tokio::sync::Mutex<()>,
}

impl SiteAgent {
    pub fn new(site: Ident, adapter: Arc<dyn Adapter>, policy: FirewallPolicy, principals: Principals) -> Self {
        SiteAgent { site, policy, principals, adapter, writer: tokio::sync::Mutex::new(()) }
    }

    pub fn adapter(&self) -> &Arc<dyn Adapter> {
        &self.adapter
    }

    pub fn decide(&self, req: &AgentRequest) -> Action {
        let who = self.principals.authenticate(req.principal.as_deref(), req.token.as_deref());
        firewall_decide(&self.policy, who, req.payload.operation())
    }

    pub async fn handle(self: &Arc<Self>, req: AgentRequest) -> Handled {
        match self.decide(&req) {
            Action::Drop => return Handled::Silence,
            Action::Deny => {
                let op = req.payload.operation();
                return Handled::Reply(AgentResponse::failed(ResponseStatus::Denied, format!("{op} refused by site {}", self.site)));
            }
            Action::Forward => {}
        }
        let _guard = match &req.payload {
            AgentPayload::Write(_) => Some(self.writer.lock().await),
            _ => None,
        };
        let me = self.clone();
        let payload = req.payload;
        let result = tokio::task::spawn_blocking(move || me.run(payload)).await;
        Handled::Reply(match result {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => AgentResponse::failed(ResponseStatus::Error, e.to_string()),
            Err(e) => AgentResponse::failed(ResponseStatus::Error, format!("adapter task failed: {e}")),
        })
    }

    fn run(&self, payload: AgentPayload) -> Result<AgentResponse, AdapterError> {
        let ok = AgentResponse::empty(ResponseStatus::Ok);
        Ok(match payload {
            AgentPayload::Subquery(sq) => {
                let r = self.adapter.run_subquery(&sq)?;
                AgentResponse { rows: Some(r.rows), skipped_casts: Some(r.skipped_casts), ..ok }
            }
            AgentPayload::Write(sw) => AgentResponse { affected: Some(self.adapter.apply_write(&sw)?), ..ok },
            AgentPayload::SchemaProbe => AgentResponse { schema: Some(self.adapter.local_schema()?), ..ok },
        })
    }
}

// ---------------------------------------------------------------- wire layer

fn header(h: &HeaderMap, name: &str) -> Option<String> {
    h.get(name).and_then(|v| v.to_str().ok()).map(str::to_string)
}

async fn respond(agent: Arc<SiteAgent>, headers: HeaderMap, payload: AgentPayload) -> Response {
    let req = AgentRequest { principal: header(&headers, PRINCIPAL_HEADER), token: header(&headers, TOKEN_HEADER), payload };
    match agent.handle(req).await {
        // Hold the connection open without writing a byte.
        Handled::Silence => std::future::pending().await,
        Handled::Reply(r) => {
            let code = match r.status {
                ResponseStatus::Ok => StatusCode::OK,
                ResponseStatus::Denied => StatusCode::FORBIDDEN,
                ResponseStatus::Error => StatusCode::INTERNAL_SERVER_ERROR,
            };
            (code, Json(r)).into_response()
        }
    }
}

pub fn router(agent: Arc<SiteAgent>) -> Router {
    Router::new()
        .route(SUBQUERY_PATH, post(|State(a), h, Json(sq)| respond(a, h, AgentPayload::Subquery(sq))))
        .route(WRITE_PATH, post(|State(a), h, Json(sw)| respond(a, h, AgentPayload::Write(sw))))
        .route(SCHEMA_PATH, get(|State(a), h| respond(a, h, AgentPayload::SchemaProbe)))
        .with_state(agent)
}

// ------------------------------------------------------------------- config

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {detail}")]
    Bind { addr: String, detail: String },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// Configuration of a standalone site agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub site: Ident,
    pub listen: String,
    pub adapter: AdapterKind,
    /// Store directory, relative to the config file.
    pub location: PathBuf,
    /// Local classes; when omitted the store's dictionary file is used.
    #[serde(default)]
    pub classes: Vec<LocalClassDef>,
    pub principals: Principals,
    #[serde(default)]
    pub policy: FirewallPolicy,
}

impl AgentConfig {
    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Config(format!("{}: {e}", path.display())))?;
        let mut c: AgentConfig = serde_json::from_str(&text).map_err(|e| AgentError::Config(format!("{}: {e}", path.display())))?;
        if c.location.is_relative() {
            c.location = path.parent().unwrap_or(Path::new(".")).join(&c.location);
        }
        if c.policy.rules.is_empty() && c.principals.0.is_empty() {
            return Err(AgentError::Config("no principals and no rules: every request would be refused".into()));
        }
        Ok(c)
    }

    pub fn build(&self) -> Result<Arc<SiteAgent>, AgentError> {
        let adapter = open_adapter(self.adapter, self.site.clone(), &self.location, self.classes.clone())?;
        Ok(Arc::new(SiteAgent::new(self.site.clone(), adapter, self.policy.clone(), self.principals.clone())))
    }
}

/// A bound, running agent.
pub struct RunningAgent {
    pub addr: SocketAddr,
    shutdown: Arc<tokio::sync::Notify>,
    task: tokio::task::JoinHandle<()>,
}

impl RunningAgent {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting and closes idle connections. Requests held by a DROP
    /// rule stay unanswered.
    pub fn stop(&self) {
        self.shutdown.notify_one();
    }
}

impl Drop for RunningAgent {
    fn drop(&mut self) {
        self.shutdown.notify_one();
        self.task.abort();
    }
}

/// Binds `listen` and serves the agent protocol in the background.
pub async fn agent_serve(agent: Arc<SiteAgent>, listen: &str) -> Result<RunningAgent, AgentError> {
    let bind = |e: std::io::Error| AgentError::Bind { addr: listen.to_string(), detail: e.to_string() };
    let listener = tokio::net::TcpListener::bind(listen).await.map_err(bind)?;
    let addr = listener.local_addr().map_err(bind)?;
    let site = agent.site.clone();
    let shutdown = Arc::new(tokio::sync::Notify::new());
    let signal = shutdown.clone();
    let task = tokio::spawn(async move {
        let served = axum::serve(listener, router(agent)).with_graceful_shutdown(async move { signal.notified().await });
        if let Err(e) = served.await {
            tracing::error!(%site, "agent stopped: {e}");
        }
    });
    Ok(RunningAgent { addr, shutdown, task })
}
