//! HTTP client of the server API, used by the CLI and the REPL.

use std::time::Duration;

use mdbs_core::catalog::LocalSchemaDescriptor;
use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::api::{
    ApiError, HealthResponse, QueryRequest, QueryResponse, ReloadResponse, RunOptions, SchemaResponse, SitesResponse,
    ViewInfo, HEALTH_PATH, QUERY_PATH, RELOAD_PATH, SCHEMA_PATH, SITES_PATH, VIEWS_PATH,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach server at {url}: {detail}")]
    Connection { url: String, detail: String },
    #[error("{}: {}", .0.kind, .0.message)]
    Api(ApiError),
    #[error("unexpected response from server: {0}")]
    Protocol(String),
}

pub struct ApiClient {
    base: String,
    http: reqwest::Client,
}

impl ApiClient {
    pub fn new(base: &str) -> Self {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(5))
            .build()
            .expect("http client builds");
        ApiClient { base: base.trim_end_matches('/').to_string(), http }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn send<T: DeserializeOwned>(&self, req: reqwest::RequestBuilder, path: &str) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = req.send().await.map_err(|e| ClientError::Connection { url: url.clone(), detail: e.to_string() })?;
        let ok = resp.status().is_success();
        let bytes = resp.bytes().await.map_err(|e| ClientError::Connection { url, detail: e.to_string() })?;
        if ok {
            return serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol(e.to_string()));
        }
        match serde_json::from_slice::<QueryResponse>(&bytes) {
            Ok(QueryResponse { error: Some(e), .. }) => Err(ClientError::Api(e)),
            _ => Err(ClientError::Protocol(String::from_utf8_lossy(&bytes).into_owned())),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        self.send(self.http.get(format!("{}{path}", self.base)), path).await
    }

    /// Query and explain answers come back whole, errors included: an API
    /// error is part of the response, not a `ClientError`.
    pub async fn query(&self, req: &QueryRequest) -> Result<QueryResponse, ClientError> {
        let url = format!("{}{QUERY_PATH}", self.base);
        let resp = self
            .http
            .post(&url)
            .json(req)
            .send()
            .await
            .map_err(|e| ClientError::Connection { url: url.clone(), detail: e.to_string() })?;
        resp.json().await.map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub async fn schema(&self) -> Result<SchemaResponse, ClientError> {
        self.get(SCHEMA_PATH).await
    }

    pub async fn sites(&self) -> Result<SitesResponse, ClientError> {
        self.get(SITES_PATH).await
    }

    pub async fn site_schema(&self, id: &str) -> Result<LocalSchemaDescriptor, ClientError> {
        self.get(&format!("{SITES_PATH}/{id}/schema")).await
    }

    pub async fn views(&self) -> Result<Vec<ViewInfo>, ClientError> {
        self.get(VIEWS_PATH).await
    }

    pub async fn run_view(&self, name: &str, opts: &RunOptions) -> Result<QueryResponse, ClientError> {
        let path = format!("{VIEWS_PATH}/{name}/run");
        let url = format!("{}{path}", self.base);
        let resp = self
            .http
            .post(&url)
            .json(opts)
            .send()
            .await
            .map_err(|e| ClientError::Connection { url, detail: e.to_string() })?;
        resp.json().await.map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub async fn reload(&self) -> Result<ReloadResponse, ClientError> {
        self.send(self.http.post(format!("{}{RELOAD_PATH}", self.base)), RELOAD_PATH).await
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        self.get(HEALTH_PATH).await
    }
}
