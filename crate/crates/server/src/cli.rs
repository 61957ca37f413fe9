//! The `mdbs` command line: server, one-shot queries, the REPL, catalog
//! tools and standalone site agents.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use mdbs_core::catalog::{load_catalog, validate_catalog};
use mdbs_core::exec::{Column, FailureMode, PerSiteStatus, Row};
use mdbs_core::pipeline::run_pipeline;
use mdbs_core::Value;
use mdbs_site::{agent_serve, AgentConfig};

use crate::api::{QueryRequest, QueryResponse};
use crate::client::{ApiClient, ClientError};
use crate::config::ServerConfig;
use crate::http::serve;

pub const EXIT_OK: u8 = 0;
pub const EXIT_QUERY: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CONNECT: u8 = 3;

const DEFAULT_SERVER: &str = "http://127.0.0.1:7100";

#[derive(Debug, Parser)]
#[command(name = "mdbs", version, about = "Federated multidatabase server and client")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the multidatabase server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute one statement and print the result grid.
    Query {
        #[arg(long, default_value = DEFAULT_SERVER)]
        server: String,
        /// Return surviving rows when a horizontal fragment's site fails.
        #[arg(long)]
        partial: bool,
        #[arg(long)]
        timeout_ms: Option<u64>,
        /// Print the raw JSON response.
        #[arg(long)]
        json: bool,
        text: String,
    },
    /// Show the decomposition plan of a statement without running it.
    Explain {
        #[arg(long, default_value = DEFAULT_SERVER)]
        server: String,
        #[arg(long)]
        json: bool,
        text: String,
    },
    /// Interactive session against a running server.
    Repl {
        #[arg(long, default_value = DEFAULT_SERVER)]
        server: String,
    },
    /// Offline catalog tools.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
    /// Run a standalone site agent.
    SiteAgent {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    /// Check a catalog document and print its validation report.
    Validate { path: PathBuf },
    /// Run schema integration over a declarations document and print the catalog.
    Integrate {
        decls: PathBuf,
        /// Write the catalog here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs a parsed command line, writing everything user-facing to `out`.
/// Returns the process exit code.
pub async fn execute(cli: Cli, out: &mut (dyn Write + Send)) -> u8 {
    match cli.command {
        Command::Serve { config } => run_server(&config, out).await,
        Command::Query { server, partial, timeout_ms, json, text } => {
            let mut req = QueryRequest::execute(&text);
            if partial {
                req = req.with_failure_mode(FailureMode::Partial);
            }
            req.timeout_ms = timeout_ms;
            one_shot(&ApiClient::new(&server), &req, json, out).await
        }
        Command::Explain { server, json, text } => {
            one_shot(&ApiClient::new(&server), &QueryRequest::explain(&text), json, out).await
        }
        Command::Repl { server } => {
            let stdin = std::io::stdin();
            repl(&ApiClient::new(&server), stdin.lock(), out).await
        }
        Command::Catalog { command: CatalogCommand::Validate { path } } => validate_file(&path, out),
        Command::Catalog { command: CatalogCommand::Integrate { decls, out: dest } } => {
            integrate_file(&decls, dest.as_deref(), out)
        }
        Command::SiteAgent { config } => run_agent(&config, out).await,
    }
}

async fn run_server(path: &Path, out: &mut (dyn Write + Send)) -> u8 {
    let config = match ServerConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "{e}");
            return EXIT_CONFIG;
        }
    };
    match serve(config).await {
        Ok(server) => {
            let _ = writeln!(out, "mdbs serving catalog v{} on {}", server.state.snapshot().catalog.version, server.url());
            let _ = tokio::signal::ctrl_c().await;
            server.stopped().await;
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
            EXIT_CONFIG
        }
    }
}

async fn run_agent(path: &Path, out: &mut (dyn Write + Send)) -> u8 {
    let started = match AgentConfig::load(path) {
        Ok(cfg) => match cfg.build() {
            Ok(agent) => agent_serve(agent, &cfg.listen).await.map(|r| (cfg.site, r)),
            Err(e) => Err(e),
        },
        Err(e) => Err(e),
    };
    match started {
        Ok((site, running)) => {
            let _ = writeln!(out, "site agent {site} listening on {}", running.url());
            let _ = tokio::signal::ctrl_c().await;
            running.stop();
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
            EXIT_CONFIG
        }
    }
}

fn validate_file(path: &Path, out: &mut dyn Write) -> u8 {
    let catalog = match std::fs::read_to_string(path).map_err(|e| e.to_string()) {
        Ok(text) => load_catalog(&text).map_err(|e| e.to_string()),
        Err(e) => Err(e),
    };
    let catalog = match catalog {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "{}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let report = validate_catalog(&catalog);
    let _ = write!(out, "{report}");
    let errors = report.errors().count();
    let _ = writeln!(out, "{}: {errors} error(s), {} warning(s)", path.display(), report.warnings().count());
    if errors == 0 {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}

fn integrate_file(path: &Path, dest: Option<&Path>, out: &mut dyn Write) -> u8 {
    let result = std::fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| run_pipeline(&t).map_err(|e| e.to_string()));
    let (catalog, warnings) = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(out, "{}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    for w in &warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let doc = catalog.to_document();
    match dest {
        Some(d) => {
            if let Err(e) = std::fs::write(d, doc + "\n") {
                let _ = writeln!(out, "{}: {e}", d.display());
                return EXIT_CONFIG;
            }
            let _ = writeln!(out, "wrote {}", d.display());
        }
        None => {
            let _ = writeln!(out, "{doc}");
        }
    }
    EXIT_OK
}

async fn one_shot(client: &ApiClient, req: &QueryRequest, json: bool, out: &mut (dyn Write + Send)) -> u8 {
    match client.query(req).await {
        Ok(resp) => {
            if json {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&resp).unwrap_or_default());
            } else {
                let _ = write!(out, "{}", render_response(&resp));
            }
            if resp.error.is_some() {
                EXIT_QUERY
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
            exit_for(&e)
        }
    }
}

fn exit_for(e: &ClientError) -> u8 {
    match e {
        ClientError::Connection { .. } => EXIT_CONNECT,
        ClientError::Api(_) | ClientError::Protocol(_) => EXIT_QUERY,
    }
}

// ------------------------------------------------------------------ rendering

fn cell(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        other => other.to_literal(),
    }
}

/// Column-aligned grid with a header rule.
pub fn render_grid(columns: &[Column], rows: &[Row]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(cell).collect()).collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| cells.iter().map(|r| r[i].chars().count()).chain([c.name.as_str().len()]).max().unwrap_or(0))
        .collect();
    let line = |vals: Vec<&str>| {
        let padded: Vec<String> = vals.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        padded.join(" | ").trim_end().to_string()
    };
    let mut s = line(columns.iter().map(|c| c.name.as_str()).collect());
    s.push('\n');
    s.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    s.push('\n');
    for r in &cells {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
        s.push('\n');
    }
    s
}

fn render_statuses(statuses: &[PerSiteStatus]) -> String {
    statuses
        .iter()
        .map(|s| {
            let mut l = format!("  {} {} count={} {}ms", s.site, s.outcome, s.count, s.elapsed_ms);
            if s.skipped_casts > 0 {
                l.push_str(&format!(" skipped_casts={}", s.skipped_casts));
            }
            if !s.message.is_empty() {
                l.push_str(&format!(" ({})", s.message));
            }
            l + "\n"
        })
        .collect()
}

fn render_explain(doc: &serde_json::Value) -> String {
    let mut s = format!("plan for: {}\n", doc["statement"].as_str().unwrap_or_default());
    for sq in doc["subqueries"].as_array().into_iter().flatten() {
        s.push_str(&format!(
            "  [{}] {}\n    {}\n",
            sq["site"].as_str().unwrap_or_default(),
            sq["purpose"].as_str().unwrap_or_default(),
            sq["local_text"].as_str().unwrap_or_default()
        ));
    }
    if !doc["composition"].is_null() {
        s.push_str(&format!("composition: {}\n", doc["composition"]));
    }
    s
}

pub fn render_response(r: &QueryResponse) -> String {
    let mut s = String::new();
    if let Some(e) = &r.error {
        s.push_str(&format!("error {}: {}", e.kind, e.message));
        if let Some(at) = e.locus {
            s.push_str(&format!(" (at offset {at})"));
        }
        s.push('\n');
    }
    if let Some(doc) = &r.explain {
        s.push_str(&render_explain(doc));
    }
    if let (Some(cols), Some(rows)) = (&r.columns, &r.rows) {
        s.push_str(&render_grid(cols, rows));
        s.push_str(&format!("({} row{})", rows.len(), if rows.len() == 1 { "" } else { "s" }));
        if r.partial == Some(true) {
            s.push_str(" PARTIAL");
        }
        s.push('\n');
    }
    if let Some(per_site) = &r.per_site {
        s.push_str(&render_statuses(per_site));
    }
    s
}

// ----------------------------------------------------------------------- repl

/// Reads statements terminated by `;` and meta-commands from `input` until
/// end of input or `\quit`. Errors are printed and the session continues.
pub async fn repl(client: &ApiClient, input: impl BufRead, out: &mut (dyn Write + Send)) -> u8 {
    let mut explain_on = false;
    let mut buf = String::new();
    let _ = write!(out, "mdbs> ");
    let _ = out.flush();
    for line in input.lines() {
        let Ok(line) = line else { break };
        let trimmed = line.trim();
        if buf.trim().is_empty() && trimmed.starts_with('\\') {
            let mut words = trimmed.split_whitespace();
            match (words.next().unwrap_or_default(), words.next()) {
                ("\\quit" | "\\q", _) => return EXIT_OK,
                ("\\schema", _) => show_schema(client, out).await,
                ("\\sites", _) => show_sites(client, out).await,
                ("\\explain", Some("on")) => explain_on = true,
                ("\\explain", Some("off")) => explain_on = false,
                ("\\explain", _) => {
                    let _ = writeln!(out, "explain is {}", if explain_on { "on" } else { "off" });
                }
                (other, _) => {
                    let _ = writeln!(out, "unknown command {other}; try \\schema, \\sites, \\explain on|off, \\quit");
                }
            }
        } else {
            buf.push_str(&line);
            buf.push('\n');
            if trimmed.ends_with(';') {
                let text = buf.trim().trim_end_matches(';').trim().to_string();
                buf.clear();
                if !text.is_empty() {
                    run_statement(client, &text, explain_on, out).await;
                }
            }
        }
        let _ = write!(out, "{}", if buf.trim().is_empty() { "mdbs> " } else { "   -> " });
        let _ = out.flush();
    }
    EXIT_OK
}

async fn run_statement(client: &ApiClient, text: &str, explain_on: bool, out: &mut (dyn Write + Send)) {
    if explain_on {
        match client.query(&QueryRequest::explain(text)).await {
            Ok(r) if r.error.is_some() => {
                let _ = write!(out, "{}", render_response(&r));
                return;
            }
            Ok(r) => {
                let _ = write!(out, "{}", render_response(&r));
            }
            Err(e) => {
                let _ = writeln!(out, "{e}");
                return;
            }
        }
    }
    match client.query(&QueryRequest::execute(text)).await {
        Ok(r) => {
            let _ = write!(out, "{}", render_response(&r));
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
        }
    }
}

async fn show_schema(client: &ApiClient, out: &mut (dyn Write + Send)) {
    match client.schema().await {
        Ok(s) => {
            for c in &s.classes {
                let attrs: Vec<String> = c.attributes.iter().map(|a| format!("{} {}", a.name, a.ty.name())).collect();
                let kind = c.kind.map(|k| format!(" {k:?}").to_uppercase()).unwrap_or_default();
                let stale = if c.stale { " STALE" } else { "" };
                let _ = writeln!(out, "{}({}){kind}{stale}", c.name, attrs.join(", "));
                for f in &c.fragments {
                    let _ = writeln!(out, "  {}.{}", f.site, f.local_class);
                }
            }
            for v in &s.views {
                let _ = writeln!(out, "view {} = {}", v.name, v.query);
            }
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
        }
    }
}

async fn show_sites(client: &ApiClient, out: &mut (dyn Write + Send)) {
    match client.sites().await {
        Ok(s) => {
            for site in &s.sites {
                let health = if site.healthy { "up" } else { "DOWN" };
                let mode = format!("{:?}", site.mode).to_uppercase();
                let _ = writeln!(out, "{} {mode} {} {} {health} {}", site.id, site.adapter, site.address, site.detail);
            }
        }
        Err(e) => {
            let _ = writeln!(out, "{e}");
        }
    }
}
