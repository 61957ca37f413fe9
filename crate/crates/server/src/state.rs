//! The published state of the server: one catalog version together with the
//! site connections built for it, swapped as a unit on reload.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures::future::join_all;
use mdbs_core::catalog::{
    load_catalog, validate_catalog, AdapterKind, Catalog, LocalClassDef, LocalSchemaDescriptor, SiteDescriptor, SiteMode,
};
use mdbs_core::decompose::{decompose_select, decompose_write, explain, explain_write, DecomposeError, SubQuery, SubWrite};
use mdbs_core::exec::{execute_plan, execute_write, Column, ExecError, Outcome, SiteClient, SiteError, SiteSet};
use mdbs_core::gql::{parse_statement, validate, GqlError};
use mdbs_core::pipeline::{diff_local_schema, mark_stale};
use mdbs_core::{CanonicalType, Ident, Value};
use mdbs_site::{
    open_adapter, translate_query, translate_write, EmbeddedSiteClient, FirewallPolicy, Principals, RemoteSiteClient,
    SiteAgent, SERVER_PRINCIPAL,
};
use parking_lot::{Mutex, RwLock};

use crate::api::{
    ApiError, ClassInfo, FragmentInfo, QueryMode, QueryRequest, QueryResponse, ReloadResponse, RunOptions,
    SchemaResponse, SiteInfo, SitesResponse, ViewInfo,
};
use crate::config::ServerConfig;
use crate::ServerError;

/// Longest wait for a site during health checks and schema probes.
const PROBE_TIMEOUT: Duration = Duration::from_millis(1000);

pub struct SiteEntry {
    pub descriptor: SiteDescriptor,
    pub address: String,
    pub client: Arc<dyn SiteClient>,
    agent: Option<Arc<SiteAgent>>,
}

/// A catalog version and the connections that serve it.
pub struct Snapshot {
    pub catalog: Arc<Catalog>,
    pub sites: SiteSet,
    entries: Vec<SiteEntry>,
}

impl Snapshot {
    fn empty() -> Self {
        Snapshot { catalog: Arc::new(Catalog::default()), sites: SiteSet::new(), entries: Vec::new() }
    }

    pub fn entries(&self) -> &[SiteEntry] {
        &self.entries
    }

    fn entry(&self, site: &str) -> Option<&SiteEntry> {
        self.entries.iter().find(|e| e.descriptor.id == site)
    }

    fn classes(&self, site: &Ident) -> &[LocalClassDef] {
        self.catalog.local_schema(site.as_str()).map(|l| l.classes.as_slice()).unwrap_or(&[])
    }

    /// Local-language text of `sq`: the embedded adapter's own rendering when
    /// the site is in-process, otherwise rendered from the catalog.
    pub fn translate_query(&self, sq: &SubQuery) -> String {
        match self.entry(sq.site.as_str()) {
            Some(SiteEntry { agent: Some(a), .. }) => a.adapter().translate_query(sq),
            Some(e) => translate_query(e.descriptor.adapter, self.classes(&sq.site), sq),
            None => String::new(),
        }
    }

    pub fn translate_write(&self, sw: &SubWrite) -> String {
        match self.entry(sw.site.as_str()) {
            Some(SiteEntry { agent: Some(a), .. }) => a.adapter().translate_write(sw),
            Some(e) => translate_write(e.descriptor.adapter, self.classes(&sw.site), sw),
            None => String::new(),
        }
    }
}

/// Everything an embedded agent depends on; an unchanged key means the
/// running agent (and its store cache) is kept across reloads.
#[derive(Clone, PartialEq)]
struct AgentKey {
    adapter: AdapterKind,
    location: PathBuf,
    token: String,
    policy: FirewallPolicy,
    classes: Vec<LocalClassDef>,
}

pub struct Mdbs {
    config: ServerConfig,
    current: RwLock<Arc<Snapshot>>,
    reload: tokio::sync::Mutex<()>,
    agents: Mutex<HashMap<Ident, (AgentKey, Arc<SiteAgent>)>>,
}

fn gql_error(e: GqlError) -> ApiError {
    ApiError { locus: e.position(), ..ApiError::new(e.kind(), &e) }
}

fn decompose_error(e: DecomposeError) -> ApiError {
    ApiError::new(e.kind(), &e)
}

async fn bounded<T>(t: Duration, f: impl std::future::Future<Output = Result<T, SiteError>>) -> Result<T, SiteError> {
    tokio::time::timeout(t, f).await.unwrap_or(Err(SiteError::Timeout))
}

impl Mdbs {
    /// Loads, validates and publishes the configured catalog.
    pub async fn start(config: ServerConfig) -> Result<Arc<Self>, ServerError> {
        let m = Arc::new(Mdbs {
            config,
            current: RwLock::new(Arc::new(Snapshot::empty())),
            reload: tokio::sync::Mutex::new(()),
            agents: Mutex::new(HashMap::new()),
        });
        m.reload().await?;
        Ok(m)
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    /// The snapshot a request should pin for its whole lifetime.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().clone()
    }

    fn catalog_dir(&self) -> &Path {
        self.config.catalog.parent().unwrap_or(Path::new("."))
    }

    fn connect(&self, c: &Catalog, d: &SiteDescriptor) -> Result<SiteEntry, ServerError> {
        let site_err = |detail: String| ServerError::Site { site: d.id.to_string(), detail };
        let o = self.config.site(d.id.as_str()).cloned().unwrap_or_default();
        match d.mode {
            SiteMode::Remote => {
                let endpoint = o
                    .endpoint
                    .or_else(|| d.endpoint.clone())
                    .ok_or_else(|| site_err("remote site has no endpoint".into()))?;
                let client = RemoteSiteClient::new(&endpoint, SERVER_PRINCIPAL, &d.token);
                Ok(SiteEntry { descriptor: d.clone(), address: endpoint, client: Arc::new(client), agent: None })
            }
            SiteMode::Embedded => {
                let ls = c.local_schema(d.id.as_str());
                let location = match (o.location, ls) {
                    (Some(l), _) => l,
                    (None, Some(ls)) => self.catalog_dir().join(&ls.storage.location),
                    (None, None) => return Err(site_err("embedded site has no storage location".into())),
                };
                let key = AgentKey {
                    adapter: d.adapter,
                    location: location.clone(),
                    token: d.token.clone(),
                    policy: o.policy.unwrap_or_else(|| FirewallPolicy::only(SERVER_PRINCIPAL)),
                    classes: ls.map(|l| l.classes.clone()).unwrap_or_default(),
                };
                let agent = self.agent_for(&d.id, key).map_err(|e| site_err(e.to_string()))?;
                let client = EmbeddedSiteClient::new(agent.clone(), SERVER_PRINCIPAL, &d.token);
                Ok(SiteEntry {
                    descriptor: d.clone(),
                    address: location.display().to_string(),
                    client: Arc::new(client),
                    agent: Some(agent),
                })
            }
        }
    }

    fn agent_for(&self, site: &Ident, key: AgentKey) -> Result<Arc<SiteAgent>, mdbs_site::AdapterError> {
        let mut agents = self.agents.lock();
        if let Some((k, a)) = agents.get(site) {
            if *k == key {
                return Ok(a.clone());
            }
        }
        let adapter = open_adapter(key.adapter, site.clone(), &key.location, key.classes.clone())?;
        let principals = Principals::single(SERVER_PRINCIPAL, &key.token);
        let agent = Arc::new(SiteAgent::new(site.clone(), adapter, key.policy.clone(), principals));
        agents.insert(site.clone(), (key, agent.clone()));
        Ok(agent)
    }

    /// Re-reads the catalog file, reconnects sites, flags mappings broken by
    /// a site's live schema, and publishes the result as the next version.
    /// Queries already running keep the snapshot they started with.
    pub async fn reload(&self) -> Result<ReloadResponse, ServerError> {
        let _writer = self.reload.lock().await;
        let path = &self.config.catalog;
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServerError::Config(format!("cannot read catalog {}: {e}", path.display())))?;
        let mut catalog = load_catalog(&text)?;
        let report = validate_catalog(&catalog);
        if !report.is_ok() {
            return Err(ServerError::InvalidCatalog(report));
        }
        for w in report.warnings() {
            tracing::warn!("{w}");
        }
        let entries = catalog.sites.iter().map(|d| self.connect(&catalog, d)).collect::<Result<Vec<_>, _>>()?;

        let probes = join_all(entries.iter().map(|e| bounded(PROBE_TIMEOUT, e.client.local_schema()))).await;
        let mut unprobed = Vec::new();
        for (e, live) in entries.iter().zip(probes) {
            let id = &e.descriptor.id;
            match live {
                Ok(live) => catalog = self.flag_drift(catalog, id, &live),
                Err(err) => {
                    tracing::warn!(site = %id, "schema probe failed: {err}");
                    unprobed.push(id.clone());
                }
            }
        }

        let previous = self.snapshot().catalog.version;
        catalog.version = catalog.version.max(previous + 1);
        let stale = catalog.mappings.iter().filter(|m| m.stale).map(|m| m.class.clone()).collect();
        let sites = entries.iter().map(|e| (e.descriptor.id.clone(), e.client.clone())).collect();
        let snap = Snapshot { catalog: Arc::new(catalog), sites, entries };
        let version = snap.catalog.version;
        *self.current.write() = Arc::new(snap);
        tracing::info!(version, "catalog published");
        Ok(ReloadResponse { catalog_version: version, stale, unprobed })
    }

    fn flag_drift(&self, catalog: Catalog, site: &Ident, live: &LocalSchemaDescriptor) -> Catalog {
        let Some(declared) = catalog.local_schema(site.as_str()) else { return catalog };
        let live = LocalSchemaDescriptor { site: declared.site.clone(), ..live.clone() };
        match diff_local_schema(declared, &live) {
            Ok(d) if !d.is_empty() => {
                tracing::warn!(site = %site, removed = d.removed.len(), retyped = d.retyped.len(), "local schema drifted");
                let version = catalog.version;
                match mark_stale(&catalog, &d) {
                    Ok(c) => Catalog { version, ..c },
                    Err(_) => catalog,
                }
            }
            _ => catalog,
        }
    }

    /// Runs one request against the current snapshot.
    pub async fn query(&self, req: &QueryRequest) -> QueryResponse {
        let snap = self.snapshot();
        let start = Instant::now();
        let mut resp = self.run(&snap, req).await.unwrap_or_else(QueryResponse::failed);
        resp.catalog_version = Some(snap.catalog.version);
        if req.mode == QueryMode::Execute {
            resp.elapsed_ms = Some(start.elapsed().as_millis() as u64);
        }
        resp
    }

    async fn run(&self, snap: &Snapshot, req: &QueryRequest) -> Result<QueryResponse, ApiError> {
        let stmt = parse_statement(&req.text).map_err(gql_error)?;
        let ts = validate(&stmt, &snap.catalog).map_err(gql_error)?;
        let opts = self.config.exec.options(req.failure_mode, req.timeout_ms);

        if ts.as_select().is_some() {
            let plan = decompose_select(&ts, &snap.catalog).map_err(decompose_error)?;
            if req.mode == QueryMode::Explain {
                let doc = explain(&plan, &|sq| snap.translate_query(sq));
                return Ok(QueryResponse { explain: Some(doc.to_json()), ..Default::default() });
            }
            return Ok(match execute_plan(&plan, &snap.sites, &opts).await {
                Ok(r) => QueryResponse {
                    columns: Some(r.result.columns),
                    rows: Some(r.result.rows),
                    partial: Some(r.partial),
                    per_site: Some(r.statuses),
                    ..Default::default()
                },
                Err(e) => exec_failure(e),
            });
        }

        let plan = decompose_write(&ts, &snap.catalog).map_err(decompose_error)?;
        if req.mode == QueryMode::Explain {
            let doc = explain_write(&plan, &|sw| snap.translate_write(sw));
            return Ok(QueryResponse { explain: Some(doc.to_json()), ..Default::default() });
        }
        let statuses = execute_write(&plan, &snap.sites, &opts).await;
        let ok = statuses.iter().filter(|s| s.outcome == Outcome::Ok).count();
        if ok == 0 && !statuses.is_empty() {
            return Ok(exec_failure(ExecError::SiteUnavailable(statuses)));
        }
        let affected: u64 = statuses.iter().filter(|s| s.outcome == Outcome::Ok).map(|s| s.count).sum();
        Ok(QueryResponse {
            columns: Some(vec![Column { name: "affected".into(), ty: CanonicalType::Int }]),
            rows: Some(vec![vec![Value::Int(affected as i64)]]),
            partial: Some(ok < statuses.len()),
            affected: Some(affected),
            per_site: Some(statuses),
            ..Default::default()
        })
    }

    pub fn schema(&self) -> SchemaResponse {
        let snap = self.snapshot();
        let c = &snap.catalog;
        let classes = c
            .classes
            .iter()
            .map(|vc| {
                let m = c.mapping(vc.name.as_str());
                ClassInfo {
                    name: vc.name.clone(),
                    attributes: vc.attributes.clone(),
                    kind: m.map(|m| m.kind),
                    stale: m.is_some_and(|m| m.stale),
                    fragments: m
                        .map(|m| {
                            m.fragments
                                .iter()
                                .map(|f| FragmentInfo { site: f.site.clone(), local_class: f.local_class.clone() })
                                .collect()
                        })
                        .unwrap_or_default(),
                }
            })
            .collect();
        SchemaResponse { catalog_version: c.version, classes, views: self.views() }
    }

    pub fn views(&self) -> Vec<ViewInfo> {
        let snap = self.snapshot();
        snap.catalog.views.iter().map(|v| ViewInfo { name: v.name.clone(), query: v.query.clone() }).collect()
    }

    /// Site registry with a live schema probe of every site.
    pub async fn sites(&self) -> SitesResponse {
        let snap = self.snapshot();
        let probes = join_all(snap.entries.iter().map(|e| bounded(PROBE_TIMEOUT, e.client.local_schema()))).await;
        let sites = snap
            .entries
            .iter()
            .zip(probes)
            .map(|(e, p)| SiteInfo {
                id: e.descriptor.id.clone(),
                mode: e.descriptor.mode,
                adapter: e.descriptor.adapter,
                address: e.address.clone(),
                healthy: p.is_ok(),
                detail: p.err().map(|e| e.to_string()).unwrap_or_default(),
            })
            .collect();
        SitesResponse { catalog_version: snap.catalog.version, sites }
    }

    /// The local dictionary as the site itself reports it.
    pub async fn site_schema(&self, id: &str) -> Result<LocalSchemaDescriptor, ApiError> {
        let snap = self.snapshot();
        let e = snap.entry(id).ok_or_else(|| ApiError::new("UNKNOWN_SITE", format!("no site {id}")))?;
        bounded(PROBE_TIMEOUT, e.client.local_schema())
            .await
            .map_err(|err| ApiError::new("SITE_UNAVAILABLE", format!("{id}: {err}")))
    }

    pub async fn run_view(&self, name: &str, opts: RunOptions) -> QueryResponse {
        if self.snapshot().catalog.view(name).is_none() {
            return QueryResponse::failed(ApiError::new("UNKNOWN_CLASS", format!("unknown view {name}")));
        }
        let req = QueryRequest {
            text: format!("SELECT * FROM {name}"),
            mode: QueryMode::Execute,
            failure_mode: opts.failure_mode,
            timeout_ms: opts.timeout_ms,
        };
        self.query(&req).await
    }
}

fn exec_failure(e: ExecError) -> QueryResponse {
    let per_site = (!e.statuses().is_empty()).then(|| e.statuses().to_vec());
    QueryResponse { per_site, ..QueryResponse::failed(ApiError::new(e.kind(), &e)) }
}
