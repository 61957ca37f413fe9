//! Tier isolation: only the site layer speaks the agent protocol or touches
//! stores; the core holds no network or storage dependency.

use std::fs;
use std::path::{Path, PathBuf};

fn crates() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("..")
}

fn sources(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(sources(&p));
        } else if p.extension().is_some_and(|x| x == "rs") {
            out.push((p.clone(), fs::read_to_string(&p).unwrap()));
        }
    }
    out
}

fn dependencies(krate: &str) -> Vec<String> {
    let manifest = fs::read_to_string(crates().join(krate).join("Cargo.toml")).unwrap();
    let deps = manifest.split("[dependencies]").nth(1).unwrap_or_default();
    let deps = deps.split("\n[").next().unwrap_or_default();
    deps.lines().filter_map(|l| l.split('=').next()).map(|n| n.trim().to_string()).filter(|n| !n.is_empty()).collect()
}

#[test]
fn only_the_site_layer_speaks_the_agent_protocol() {
    for krate in ["core", "server"] {
        for (path, text) in sources(&crates().join(krate).join("src")) {
            assert!(!text.contains("/agent/v1"), "{} mentions an agent route", path.display());
            assert!(!text.contains("X-MDBS-Token"), "{} sets agent credentials", path.display());
        }
    }
    let site: Vec<_> = sources(&crates().join("site").join("src"));
    assert!(site.iter().any(|(_, t)| t.contains("/agent/v1")));
}

#[test]
fn core_has_no_network_or_storage_dependencies() {
    let deps = dependencies("core");
    for banned in ["reqwest", "axum", "hyper", "csv", "mdbs-site"] {
        assert!(!deps.iter().any(|d| d == banned), "core depends on {banned}");
    }
}

#[test]
fn the_server_reaches_stores_only_through_the_site_layer() {
    for (path, text) in sources(&crates().join("server").join("src")) {
        for banned in ["csv::", "RelationalAdapter", "DocumentAdapter", "CsvAdapter", ".jsonl"] {
            assert!(!text.contains(banned), "{} uses {banned}", path.display());
        }
    }
    assert!(dependencies("server").iter().any(|d| d == "mdbs-site"));
}
