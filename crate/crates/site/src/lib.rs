//! Local sites of the multidatabase: heterogeneous storage adapters, the
//! firewall each site places in front of its agent, the agent wire protocol,
//! and the clients the server uses to reach agents.

pub mod adapter;
pub mod agent;
pub mod client;
pub mod firewall;
mod render;
pub mod table;

pub use adapter::{open_adapter, translate_query, translate_write, write_store, Adapter, AdapterError, CsvAdapter, DocumentAdapter, RelationalAdapter};
pub use agent::{agent_serve, AgentConfig, AgentError, AgentResponse, RunningAgent, SiteAgent, SERVER_PRINCIPAL};
pub use client::{EmbeddedSiteClient, RemoteSiteClient};
pub use firewall::{firewall_decide, Action, FirewallPolicy, OpPattern, Operation, Principals, Rule};
