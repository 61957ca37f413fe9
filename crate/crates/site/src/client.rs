//! `SiteClient` implementations used by the server: in-process agents and
//! agents reached over HTTP.

use std::sync::Arc;

use async_trait::async_trait;
use mdbs_core::catalog::LocalSchemaDescriptor;
use mdbs_core::decompose::{SubQuery, SubWrite};
use mdbs_core::exec::{SiteClient, SiteError, SiteReply};

use crate::agent::{
    AgentPayload, AgentRequest, AgentResponse, Handled, ResponseStatus, SiteAgent, PRINCIPAL_HEADER, SCHEMA_PATH,
    SUBQUERY_PATH, TOKEN_HEADER, WRITE_PATH,
};

fn reply(r: AgentResponse) -> Result<AgentResponse, SiteError> {
    match r.status {
        ResponseStatus::Ok => Ok(r),
        ResponseStatus::Denied => Err(SiteError::Denied(r.error.unwrap_or_default())),
        ResponseStatus::Error => Err(SiteError::Adapter(r.error.unwrap_or_default())),
    }
}

fn site_reply(r: AgentResponse) -> SiteReply {
    SiteReply { rows: r.rows.unwrap_or_default(), affected: r.affected.unwrap_or(0), skipped_casts: r.skipped_casts.unwrap_or(0) }
}

fn schema(r: AgentResponse) -> Result<LocalSchemaDescriptor, SiteError> {
    r.schema.ok_or_else(|| SiteError::Adapter("agent sent no schema".into()))
}

/// Calls an agent living in the same process. The firewall still applies.
pub struct EmbeddedSiteClient {
    agent: Arc<SiteAgent>,
    principal: String,
    token: String,
}

impl EmbeddedSiteClient {
    pub fn new(agent: Arc<SiteAgent>, principal: &str, token: &str) -> Self {
        EmbeddedSiteClient { agent, principal: principal.to_string(), token: token.to_string() }
    }

    async fn call(&self, payload: AgentPayload) -> Result<AgentResponse, SiteError> {
        let req = AgentRequest { principal: Some(self.principal.clone()), token: Some(self.token.clone()), payload };
        match self.agent.handle(req).await {
            Handled::Reply(r) => reply(r),
            Handled::Silence => std::future::pending().await,
        }
    }
}

#[async_trait]
impl SiteClient for EmbeddedSiteClient {
    async fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, SiteError> {
        self.call(AgentPayload::Subquery(sq.clone())).await.map(site_reply)
    }

    async fn apply_write(&self, sw: &SubWrite) -> Result<SiteReply, SiteError> {
        self.call(AgentPayload::Write(sw.clone())).await.map(site_reply)
    }

    async fn local_schema(&self) -> Result<LocalSchemaDescriptor, SiteError> {
        self.call(AgentPayload::SchemaProbe).await.and_then(schema)
    }
}

/// Calls an agent over the wire protocol. Deadlines are the caller's business.
pub struct RemoteSiteClient {
    base: String,
    principal: String,
    token: String,
    http: reqwest::Client,
}

impl RemoteSiteClient {
    pub fn new(base: &str, principal: &str, token: &str) -> Self {
        RemoteSiteClient {
            base: base.trim_end_matches('/').to_string(),
            principal: principal.to_string(),
            token: token.to_string(),
            http: reqwest::Client::new(),
        }
    }

    async fn send(&self, req: reqwest::RequestBuilder) -> Result<AgentResponse, SiteError> {
        let resp = req
            .header(PRINCIPAL_HEADER, &self.principal)
            .header(TOKEN_HEADER, &self.token)
            .send()
            .await
            .map_err(|e| SiteError::Unreachable(e.to_string()))?;
        let code = resp.status();
        let body: AgentResponse = resp
            .json()
            .await
            .map_err(|e| SiteError::Adapter(format!("malformed agent response ({code}): {e}")))?;
        reply(body)
    }
}

#[async_trait]
impl SiteClient for RemoteSiteClient {
    async fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, SiteError> {
        self.send(self.http.post(format!("{}{SUBQUERY_PATH}", self.base)).json(sq)).await.map(site_reply)
    }

    async fn apply_write(&self, sw: &SubWrite) -> Result<SiteReply, SiteError> {
        self.send(self.http.post(format!("{}{WRITE_PATH}", self.base)).json(sw)).await.map(site_reply)
    }

    async fn local_schema(&self) -> Result<LocalSchemaDescriptor, SiteError> {
        self.send(self.http.get(format!("{}{SCHEMA_PATH}", self.base))).await.and_then(schema)
    }
}
