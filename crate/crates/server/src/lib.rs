//! The multidatabase server: an HTTP/JSON API over the global catalog, query
//! frontend, decomposer and executor, plus the operator CLI.

pub mod api;
pub mod cli;
pub mod client;
pub mod config;
pub mod http;
pub mod state;

use mdbs_core::catalog::{CatalogError, ValidationReport};
use thiserror::Error;

pub use api::{QueryMode, QueryRequest, QueryResponse};
pub use client::{ApiClient, ClientError};
pub use config::{ExecDefaults, ServerConfig, SiteOverride};
pub use http::{router, serve, serve_state, RunningServer};
pub use state::{Mdbs, Snapshot};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid catalog:\n{0}")]
    InvalidCatalog(ValidationReport),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("site {site}: {detail}")]
    Site { site: String, detail: String },
    #[error("cannot bind {addr}: {detail}")]
    Bind { addr: String, detail: String },
}

impl ServerError {
    pub fn to_api(&self) -> api::ApiError {
        let mut e = api::ApiError::new(
            match self {
                ServerError::InvalidCatalog(_) | ServerError::Catalog(_) => "INVALID_CATALOG",
                ServerError::Config(_) | ServerError::Site { .. } | ServerError::Bind { .. } => "CONFIG_ERROR",
            },
            self,
        );
        if let ServerError::InvalidCatalog(r) = self {
            e.details = serde_json::to_value(r).ok();
        }
        e
    }
}
