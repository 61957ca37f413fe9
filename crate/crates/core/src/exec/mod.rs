//! Fans sub-queries out to sites, composes their results, and provides the
//! brute-force reference evaluator used as a testing oracle.

mod compose;
mod oracle;

pub use compose::{compose, ComposeError};
pub use oracle::{materialize, reference_evaluate, MaterializedDb};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{LocalSchemaDescriptor, MappingKind};
use crate::decompose::{DecompositionPlan, SubQuery, SubWrite, WritePlan};
use crate::value::{CanonicalType, Ident, Value};

pub type Row = Vec<Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: Ident,
    #[serde(rename = "type")]
    pub ty: CanonicalType,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultSet {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl ResultSet {
    /// Rows sorted into a canonical order, for multiset comparison.
    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| {
            a.iter().zip(b).map(|(x, y)| x.sort_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        rows
    }

    pub fn same_multiset(&self, other: &ResultSet) -> bool {
        self.columns == other.columns && self.sorted_rows() == other.sorted_rows()
    }
}

/// A site's answer to one sub-query or sub-write.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SiteReply {
    pub rows: Vec<Row>,
    pub affected: u64,
    pub skipped_casts: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SiteError {
    #[error("denied by site policy: {0}")]
    Denied(String),
    #[error("site did not answer in time")]
    Timeout,
    #[error("site unreachable: {0}")]
    Unreachable(String),
    #[error("adapter error: {0}")]
    Adapter(String),
}

/// A connection to one site agent, in-process or remote.
#[async_trait]
pub trait SiteClient: Send + Sync {
    async fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, SiteError>;
    async fn apply_write(&self, sw: &SubWrite) -> Result<SiteReply, SiteError>;
    async fn local_schema(&self) -> Result<LocalSchemaDescriptor, SiteError>;
}

pub type SiteSet = HashMap<Ident, Arc<dyn SiteClient>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureMode {
    #[default]
    FailFast,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecOptions {
    pub timeout: Duration,
    pub failure_mode: FailureMode,
    pub max_parallel: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { timeout: Duration::from_millis(2000), failure_mode: FailureMode::FailFast, max_parallel: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Ok,
    Denied,
    Timeout,
    AdapterError,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Ok => "OK",
            Outcome::Denied => "DENIED",
            Outcome::Timeout => "TIMEOUT",
            Outcome::AdapterError => "ADAPTER_ERROR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSiteStatus {
    pub site: Ident,
    pub outcome: Outcome,
    /// Rows returned for reads, rows affected for writes.
    pub count: u64,
    pub skipped_casts: u64,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub message: String,
}

impl PerSiteStatus {
    fn from_result(site: &Ident, r: &Result<SiteReply, SiteError>, elapsed: Duration, write: bool) -> Self {
        let (outcome, count, skipped_casts, message) = match r {
            Ok(rep) => (Outcome::Ok, if write { rep.affected } else { rep.rows.len() as u64 }, rep.skipped_casts, String::new()),
            Err(e @ SiteError::Denied(_)) => (Outcome::Denied, 0, 0, e.to_string()),
            Err(e @ (SiteError::Timeout | SiteError::Unreachable(_))) => (Outcome::Timeout, 0, 0, e.to_string()),
            Err(e @ SiteError::Adapter(_)) => (Outcome::AdapterError, 0, 0, e.to_string()),
        };
        PerSiteStatus { site: site.clone(), outcome, count, skipped_casts, elapsed_ms: elapsed.as_millis() as u64, message }
    }

    /// Folds a later sub-request to the same site into this entry.
    fn merge(&mut self, other: PerSiteStatus) {
        if self.outcome == Outcome::Ok && other.outcome != Outcome::Ok {
            self.outcome = other.outcome;
            self.message = other.message;
        }
        self.count += other.count;
        self.skipped_casts += other.skipped_casts;
        self.elapsed_ms = self.elapsed_ms.max(other.elapsed_ms);
    }
}

/// One entry per planned site, in first-planned order.
fn per_site(entries: Vec<PerSiteStatus>) -> Vec<PerSiteStatus> {
    let mut out: Vec<PerSiteStatus> = Vec::new();
    for e in entries {
        match out.iter_mut().find(|s| s.site == e.site) {
            Some(s) => s.merge(e),
            None => out.push(e),
        }
    }
    out
}

fn failed_sites(statuses: &[PerSiteStatus]) -> String {
    statuses
        .iter()
        .filter(|s| s.outcome != Outcome::Ok)
        .map(|s| format!("{} {}", s.site, s.outcome))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("site unavailable: {}", failed_sites(.0))]
    SiteUnavailable(Vec<PerSiteStatus>),
    #[error("partial results are not allowed for a vertical class: {}", failed_sites(.0))]
    PartialUnsupported(Vec<PerSiteStatus>),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

impl ExecError {
    pub fn kind(&self) -> &'static str {
        match self {
            ExecError::SiteUnavailable(_) => "SITE_UNAVAILABLE",
            ExecError::PartialUnsupported(_) => "PARTIAL_UNSUPPORTED",
            ExecError::Compose(_) => "SCHEMA_DRIFT",
        }
    }

    pub fn statuses(&self) -> &[PerSiteStatus] {
        match self {
            ExecError::SiteUnavailable(s) | ExecError::PartialUnsupported(s) => s,
            ExecError::Compose(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub result: ResultSet,
    /// True iff at least one planned site is not OK.
    pub partial: bool,
    pub statuses: Vec<PerSiteStatus>,
}

async fn bounded<T>(
    timeout: Duration,
    fut: impl std::future::Future<Output = Result<T, SiteError>>,
) -> Result<T, SiteError> {
    tokio::time::timeout(timeout, fut).await.unwrap_or(Err(SiteError::Timeout))
}

fn client<'a>(sites: &'a SiteSet, site: &Ident) -> Result<&'a Arc<dyn SiteClient>, SiteError> {
    sites.get(site).ok_or_else(|| SiteError::Unreachable(format!("no connection for site {site}")))
}

async fn run_one(sites: &SiteSet, sq: &SubQuery, timeout: Duration) -> (Result<SiteReply, SiteError>, Duration) {
    let start = Instant::now();
    let r = match client(sites, &sq.site) {
        Ok(c) => bounded(timeout, c.run_subquery(sq)).await,
        Err(e) => Err(e),
    };
    (r, start.elapsed())
}

/// Runs every sub-query of `plan` (at most `max_parallel` at once) and composes the answer.
pub async fn execute_plan(plan: &DecompositionPlan, sites: &SiteSet, opts: &ExecOptions) -> Result<QueryResult, ExecError> {
    let calls: Vec<_> = plan.subqueries.iter().map(|sq| run_one(sites, sq, opts.timeout)).collect();
    let replies: Vec<(Result<SiteReply, SiteError>, Duration)> =
        stream::iter(calls).buffered(opts.max_parallel.max(1)).collect().await;

    let statuses = per_site(
        plan.subqueries
            .iter()
            .zip(&replies)
            .map(|(sq, (r, elapsed))| PerSiteStatus::from_result(&sq.site, r, *elapsed, false))
            .collect(),
    );
    let partial = statuses.iter().any(|s| s.outcome != Outcome::Ok);
    if partial {
        match (opts.failure_mode, plan.kind) {
            (FailureMode::FailFast, _) => return Err(ExecError::SiteUnavailable(statuses)),
            (FailureMode::Partial, MappingKind::Vertical) => {
                return Err(ExecError::PartialUnsupported(statuses))
            }
            (FailureMode::Partial, MappingKind::Horizontal) => {}
        }
    }
    let results: Vec<Option<Vec<Row>>> = replies.into_iter().map(|(r, _)| r.ok().map(|rep| rep.rows)).collect();
    let result = compose(plan, &results)?;
    Ok(QueryResult { result, partial, statuses })
}

/// Applies sub-writes one after another in plan order. Nothing is rolled back:
/// the statuses report exactly which sites took the write.
pub async fn execute_write(plan: &WritePlan, sites: &SiteSet, opts: &ExecOptions) -> Vec<PerSiteStatus> {
    let mut entries = Vec::with_capacity(plan.subwrites.len());
    for sw in &plan.subwrites {
        let start = Instant::now();
        let r = match client(sites, &sw.site) {
            Ok(c) => bounded(opts.timeout, c.apply_write(sw)).await,
            Err(e) => Err(e),
        };
        entries.push(PerSiteStatus::from_result(&sw.site, &r, start.elapsed(), true));
    }
    per_site(entries)
}

