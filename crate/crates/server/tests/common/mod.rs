#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use mdbs::{serve, RunningServer, ServerConfig};
use mdbs_core::testing::ACME_CATALOG;
use tempfile::TempDir;

pub fn acme_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/acme")
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let dest = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &dest);
        } else {
            fs::copy(e.path(), dest).unwrap();
        }
    }
}

/// A private copy of the acme deployment, safe to write to.
pub struct Acme {
    pub dir: TempDir,
}

impl Acme {
    pub fn new() -> Self {
        let dir = TempDir::new().unwrap();
        copy_dir(&acme_dir(), dir.path());
        Acme { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.path().join("catalog.json")
    }

    pub fn catalog_json(&self) -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(self.catalog_path()).unwrap()).unwrap()
    }

    pub fn write_catalog(&self, v: &serde_json::Value) {
        fs::write(self.catalog_path(), serde_json::to_string_pretty(v).unwrap()).unwrap();
    }

    pub fn config(&self) -> ServerConfig {
        ServerConfig::for_catalog(self.catalog_path(), "127.0.0.1:0")
    }

    pub async fn serve(&self) -> RunningServer {
        serve(self.config()).await.unwrap()
    }
}

pub fn acme_catalog_json() -> serde_json::Value {
    serde_json::from_str(ACME_CATALOG).unwrap()
}
