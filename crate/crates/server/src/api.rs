//! Request and response bodies of the server's HTTP API.

use mdbs_core::catalog::{AdapterKind, AttributeDef, MappingKind, SiteMode};
use mdbs_core::exec::{Column, FailureMode, PerSiteStatus, Row};
use mdbs_core::Ident;
use serde::{Deserialize, Serialize};

pub const QUERY_PATH: &str = "/v1/query";
pub const SCHEMA_PATH: &str = "/v1/schema";
pub const SITES_PATH: &str = "/v1/sites";
pub const VIEWS_PATH: &str = "/v1/views";
pub const RELOAD_PATH: &str = "/v1/catalog/reload";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QueryMode {
    #[default]
    Execute,
    Explain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub text: String,
    #[serde(default)]
    pub mode: QueryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_mode: Option<FailureMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}

impl QueryRequest {
    pub fn execute(text: &str) -> Self {
        QueryRequest { text: text.to_string(), mode: QueryMode::Execute, failure_mode: None, timeout_ms: None }
    }

    pub fn explain(text: &str) -> Self {
        QueryRequest { mode: QueryMode::Explain, ..Self::execute(text) }
    }

    pub fn with_failure_mode(mut self, m: FailureMode) -> Self {
        self.failure_mode = Some(m);
        self
    }

    pub fn with_timeout_ms(mut self, ms: u64) -> Self {
        self.timeout_ms = Some(ms);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: String,
    pub message: String,
    /// Byte offset into the statement for scanning and parsing errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locus: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(kind: &str, message: impl ToString) -> Self {
        ApiError { kind: kind.to_string(), message: message.to_string(), locus: None, details: None }
    }
}

/// Exactly one of `rows`, `explain` and `error` is present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<Column>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Row>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<bool>,
    /// Total rows changed, for writes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affected: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_site: Option<Vec<PerSiteStatus>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_version: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explain: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

impl QueryResponse {
    pub fn failed(error: ApiError) -> Self {
        QueryResponse { error: Some(error), ..Default::default() }
    }

    pub fn error_kind(&self) -> Option<&str> {
        self.error.as_ref().map(|e| e.kind.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentInfo {
    pub site: Ident,
    pub local_class: Ident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub name: Ident,
    pub attributes: Vec<AttributeDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<MappingKind>,
    #[serde(default)]
    pub stale: bool,
    #[serde(default)]
    pub fragments: Vec<FragmentInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewInfo {
    pub name: Ident,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaResponse {
    pub catalog_version: u64,
    pub classes: Vec<ClassInfo>,
    #[serde(default)]
    pub views: Vec<ViewInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteInfo {
    pub id: Ident,
    pub mode: SiteMode,
    pub adapter: AdapterKind,
    /// Store directory for embedded sites, agent URL for remote ones.
    pub address: String,
    pub healthy: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitesResponse {
    pub catalog_version: u64,
    pub sites: Vec<SiteInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReloadResponse {
    pub catalog_version: u64,
    /// Classes whose mappings no longer match a site's live schema.
    #[serde(default)]
    pub stale: Vec<Ident>,
    /// Sites whose live schema could not be probed.
    #[serde(default)]
    pub unprobed: Vec<Ident>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub catalog_version: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_mode: Option<FailureMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}
