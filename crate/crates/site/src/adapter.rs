//! The adapter contract and the three concrete stores: an in-memory
//! relational engine loaded from CSV, JSON-lines documents, and plain CSV files.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mdbs_core::catalog::{AdapterKind, LocalAttributeDef, LocalClassDef, LocalSchemaDescriptor, StorageDescriptor};
use mdbs_core::decompose::{SubQuery, SubWrite, WriteKind};
use mdbs_core::exec::SiteReply;
use mdbs_core::{CanonicalType, Ident, Value};
use parking_lot::RwLock;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::render::{self, sql_ident, sql_literal};
use crate::table::{Cell, Table};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("store unreadable at {path}: {detail}")]
    StoreUnreadable { path: String, detail: String },
    #[error("header of {class} lacks declared columns: {}", missing.join(", "))]
    HeaderMismatch { class: String, missing: Vec<String> },
    #[error("site has no local class {0}")]
    UnknownClass(String),
    #[error("could not write store at {path}: {detail}")]
    StoreWrite { path: String, detail: String },
    #[error("dictionary: {0}")]
    Dictionary(String),
}

/// Uniform access to one site's local database.
pub trait Adapter: Send + Sync {
    fn kind(&self) -> AdapterKind;
    fn local_schema(&self) -> Result<LocalSchemaDescriptor, AdapterError>;
    /// Rows come back cast into global types, projected in sub-query order.
    fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, AdapterError>;
    fn apply_write(&self, sw: &SubWrite) -> Result<u64, AdapterError>;
    fn translate_query(&self, sq: &SubQuery) -> String;
    fn translate_write(&self, sw: &SubWrite) -> String;
}

/// File name of the optional per-site dictionary describing local classes.
pub const DICTIONARY: &str = "dictionary.json";

#[derive(Debug, Deserialize)]
struct DictAttribute {
    name: Ident,
    #[serde(default)]
    native: Option<String>,
    #[serde(rename = "type", default)]
    ty: Option<CanonicalType>,
    #[serde(default = "yes")]
    nullable: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct DictClass {
    name: Ident,
    attributes: Vec<DictAttribute>,
}

#[derive(Debug, Deserialize)]
struct Dictionary {
    classes: Vec<DictClass>,
}

/// Local classes of a store: read from its dictionary file when present,
/// otherwise as configured.
struct Classes {
    dir: PathBuf,
    configured: Vec<LocalClassDef>,
    current: RwLock<Vec<LocalClassDef>>,
}

impl Classes {
    fn open(dir: &Path, configured: Vec<LocalClassDef>) -> Result<Self, AdapterError> {
        let c = Classes { dir: dir.to_path_buf(), current: RwLock::new(configured.clone()), configured };
        c.refresh()?;
        Ok(c)
    }

    fn refresh(&self) -> Result<Vec<LocalClassDef>, AdapterError> {
        let path = self.dir.join(DICTIONARY);
        let classes = match fs::read_to_string(&path) {
            Ok(text) => parse_dictionary(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => self.configured.clone(),
            Err(e) => return Err(unreadable(&path, e)),
        };
        *self.current.write() = classes.clone();
        Ok(classes)
    }

    fn get(&self, name: &Ident) -> Result<LocalClassDef, AdapterError> {
        self.current
            .read()
            .iter()
            .find(|c| c.name == *name)
            .cloned()
            .ok_or_else(|| AdapterError::UnknownClass(name.to_string()))
    }

}

fn parse_dictionary(text: &str) -> Result<Vec<LocalClassDef>, AdapterError> {
    let d: Dictionary = serde_json::from_str(text).map_err(|e| AdapterError::Dictionary(e.to_string()))?;
    d.classes
        .into_iter()
        .map(|c| {
            let attributes = c
                .attributes
                .into_iter()
                .map(|a| {
                    let ty = match (a.ty, &a.native) {
                        (Some(t), _) => t,
                        (None, Some(n)) => render::sql_native(n)
                            .ok_or_else(|| AdapterError::Dictionary(format!("{}.{}: unknown native type {n}", c.name, a.name)))?,
                        (None, None) => return Err(AdapterError::Dictionary(format!("{}.{} has no type", c.name, a.name))),
                    };
                    Ok(LocalAttributeDef { name: a.name, ty, native: a.native, nullable: a.nullable })
                })
                .collect::<Result<_, _>>()?;
            Ok(LocalClassDef { name: c.name, attributes })
        })
        .collect()
}

fn unreadable(path: &Path, e: impl ToString) -> AdapterError {
    AdapterError::StoreUnreadable { path: path.display().to_string(), detail: e.to_string() }
}

fn write_failed(path: &Path, e: impl ToString) -> AdapterError {
    AdapterError::StoreWrite { path: path.display().to_string(), detail: e.to_string() }
}

/// Writes through a sibling temporary file so readers never see a torn store.
fn replace_file(path: &Path, bytes: &[u8]) -> Result<(), AdapterError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| write_failed(path, e))?;
    fs::rename(&tmp, path).map_err(|e| write_failed(path, e))
}

fn describe(site: &Ident, kind: AdapterKind, dir: &Path, classes: Vec<LocalClassDef>) -> LocalSchemaDescriptor {
    LocalSchemaDescriptor {
        site: site.clone(),
        classes,
        storage: StorageDescriptor { format: kind.storage_format(), location: dir.display().to_string() },
    }
}

fn read_csv(path: &Path, class: &LocalClassDef) -> Result<Table, AdapterError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| unreadable(path, e))?;
    let columns: Vec<Ident> = reader.headers().map_err(|e| unreadable(path, e))?.iter().map(Ident::from).collect();
    let missing: Vec<String> =
        class.attributes.iter().filter(|a| !columns.contains(&a.name)).map(|a| a.name.to_string()).collect();
    if !missing.is_empty() {
        return Err(AdapterError::HeaderMismatch { class: class.name.to_string(), missing });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| unreadable(path, e))?;
        rows.push((0..columns.len()).map(|i| rec.get(i).map(|s| Cell::Text(s.to_string()))).collect());
    }
    Ok(Table { columns, rows })
}

fn write_csv(path: &Path, t: &Table) -> Result<(), AdapterError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| write_failed(path, e);
    w.write_record(t.columns.iter().map(|c| c.as_str())).map_err(fail)?;
    for r in &t.rows {
        w.write_record(r.iter().map(|c| match c {
            Some(Cell::Text(s)) => s.clone(),
            Some(Cell::Json(j)) => j.to_string(),
            None => String::new(),
        }))
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| write_failed(path, e))?;
    replace_file(path, &bytes)
}

fn file_name(class: &Ident, ext: &str) -> String {
    format!("{class}.{ext}")
}

// ---------------------------------------------------------------- relational

/// A small relational engine: tables are loaded from `<TABLE>.csv` into
/// memory on first use, typed by the dictionary's native types, and written
/// back after every change.
pub struct RelationalAdapter {
    site: Ident,
    dir: PathBuf,
    classes: Classes,
    tables: RwLock<HashMap<Ident, Arc<RwLock<Table>>>>,
}

impl RelationalAdapter {
    pub fn open(site: Ident, dir: &Path, configured: Vec<LocalClassDef>) -> Result<Self, AdapterError> {
        Ok(RelationalAdapter { site, dir: dir.to_path_buf(), classes: Classes::open(dir, configured)?, tables: RwLock::default() })
    }

    fn table(&self, class: &LocalClassDef) -> Result<Arc<RwLock<Table>>, AdapterError> {
        if let Some(t) = self.tables.read().get(&class.name) {
            return Ok(t.clone());
        }
        let loaded = Arc::new(RwLock::new(read_csv(&self.dir.join(file_name(&class.name, "csv")), class)?));
        Ok(self.tables.write().entry(class.name.clone()).or_insert(loaded).clone())
    }
}

impl Adapter for RelationalAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::Relational
    }

    fn local_schema(&self) -> Result<LocalSchemaDescriptor, AdapterError> {
        Ok(describe(&self.site, self.kind(), &self.dir, self.classes.refresh()?))
    }

    fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, AdapterError> {
        let class = self.classes.get(&sq.local_class)?;
        let t = self.table(&class)?;
        let reply = t.read().scan(&class, sq);
        Ok(reply)
    }

    fn apply_write(&self, sw: &SubWrite) -> Result<u64, AdapterError> {
        let class = self.classes.get(&sw.local_class)?;
        let t = self.table(&class)?;
        let mut t = t.write();
        let mut next = t.clone();
        let n = next.apply(&class, sw, Cell::text);
        write_csv(&self.dir.join(file_name(&class.name, "csv")), &next)?;
        *t = next;
        Ok(n)
    }

    fn translate_query(&self, sq: &SubQuery) -> String {
        translate_query(self.kind(), &self.classes.current.read(), sq)
    }

    fn translate_write(&self, sw: &SubWrite) -> String {
        translate_write(self.kind(), &self.classes.current.read(), sw)
    }
}

// ------------------------------------------------------------------ document

/// One JSON object per line in `<class>.jsonl`, read afresh on every request.
pub struct DocumentAdapter {
    site: Ident,
    dir: PathBuf,
    classes: Classes,
}

impl DocumentAdapter {
    pub fn open(site: Ident, dir: &Path, configured: Vec<LocalClassDef>) -> Result<Self, AdapterError> {
        Ok(DocumentAdapter { site, dir: dir.to_path_buf(), classes: Classes::open(dir, configured)? })
    }

    fn path(&self, class: &Ident) -> PathBuf {
        self.dir.join(file_name(class, "jsonl"))
    }

    fn load(&self, class: &Ident) -> Result<Table, AdapterError> {
        let path = self.path(class);
        let text = fs::read_to_string(&path).map_err(|e| unreadable(&path, e))?;
        let mut docs = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            match serde_json::from_str::<serde_json::Value>(line) {
                Ok(serde_json::Value::Object(m)) => docs.push(m),
                Ok(_) => return Err(unreadable(&path, format!("line {}: not an object", i + 1))),
                Err(e) => return Err(unreadable(&path, format!("line {}: {e}", i + 1))),
            }
        }
        let mut columns: Vec<Ident> = Vec::new();
        for d in &docs {
            for k in d.keys() {
                if !columns.iter().any(|c| c == k.as_str()) {
                    columns.push(Ident::from(k.as_str()));
                }
            }
        }
        let rows = docs
            .iter()
            .map(|d| {
                columns
                    .iter()
                    .map(|c| d.iter().find(|(k, _)| c == k.as_str()).map(|(_, v)| Cell::Json(v.clone())))
                    .collect()
            })
            .collect();
        Ok(Table { columns, rows })
    }

    fn store(&self, class: &Ident, t: &Table) -> Result<(), AdapterError> {
        let mut out = String::new();
        for r in &t.rows {
            let mut m = serde_json::Map::new();
            for (c, cell) in t.columns.iter().zip(r) {
                match cell {
                    Some(Cell::Json(j)) => {
                        m.insert(c.to_string(), j.clone());
                    }
                    Some(Cell::Text(s)) => {
                        m.insert(c.to_string(), json!(s));
                    }
                    None => {}
                }
            }
            out.push_str(&serde_json::Value::Object(m).to_string());
            out.push('\n');
        }
        replace_file(&self.path(class), out.as_bytes())
    }
}

impl Adapter for DocumentAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::Document
    }

    fn local_schema(&self) -> Result<LocalSchemaDescriptor, AdapterError> {
        Ok(describe(&self.site, self.kind(), &self.dir, self.classes.refresh()?))
    }

    fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, AdapterError> {
        let class = self.classes.get(&sq.local_class)?;
        Ok(self.load(&class.name)?.scan(&class, sq))
    }

    fn apply_write(&self, sw: &SubWrite) -> Result<u64, AdapterError> {
        let class = self.classes.get(&sw.local_class)?;
        let mut t = self.load(&class.name)?;
        let n = t.apply(&class, sw, Cell::json);
        self.store(&class.name, &t)?;
        Ok(n)
    }

    fn translate_query(&self, sq: &SubQuery) -> String {
        translate_query(self.kind(), &[], sq)
    }

    fn translate_write(&self, sw: &SubWrite) -> String {
        translate_write(self.kind(), &[], sw)
    }
}

// ----------------------------------------------------------------------- csv

/// One `<class>.csv` per local class with a mandatory header row.
pub struct CsvAdapter {
    site: Ident,
    dir: PathBuf,
    classes: Classes,
}

impl CsvAdapter {
    pub fn open(site: Ident, dir: &Path, configured: Vec<LocalClassDef>) -> Result<Self, AdapterError> {
        Ok(CsvAdapter { site, dir: dir.to_path_buf(), classes: Classes::open(dir, configured)? })
    }

    fn path(&self, class: &Ident) -> PathBuf {
        self.dir.join(file_name(class, "csv"))
    }
}

impl Adapter for CsvAdapter {
    fn kind(&self) -> AdapterKind {
        AdapterKind::Csv
    }

    fn local_schema(&self) -> Result<LocalSchemaDescriptor, AdapterError> {
        Ok(describe(&self.site, self.kind(), &self.dir, self.classes.refresh()?))
    }

    fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, AdapterError> {
        let class = self.classes.get(&sq.local_class)?;
        Ok(read_csv(&self.path(&class.name), &class)?.scan(&class, sq))
    }

    fn apply_write(&self, sw: &SubWrite) -> Result<u64, AdapterError> {
        let class = self.classes.get(&sw.local_class)?;
        let path = self.path(&class.name);
        let mut t = read_csv(&path, &class)?;
        let n = t.apply(&class, sw, Cell::text);
        write_csv(&path, &t)?;
        Ok(n)
    }

    fn translate_query(&self, sq: &SubQuery) -> String {
        translate_query(self.kind(), &[], sq)
    }

    fn translate_write(&self, sw: &SubWrite) -> String {
        translate_write(self.kind(), &[], sw)
    }
}

// --------------------------------------------------------------- translation

fn declared<'a>(classes: &'a [LocalClassDef], class: &'a Ident) -> impl Fn(&str) -> bool + 'a {
    move |a: &str| classes.iter().any(|c| c.name == *class && c.attribute(a).is_some())
}

fn relational_query(classes: &[LocalClassDef], sq: &SubQuery) -> String {
    let declared = declared(classes, &sq.local_class);
    let cols: Vec<String> = sq.columns.iter().map(|c| render::sql_column(c, &declared)).collect();
    let mut out = format!("SELECT {} FROM {}", cols.join(", "), sql_ident(sq.local_class.as_str()));
    if let Some(p) = &sq.predicate {
        out.push_str(" WHERE ");
        out.push_str(&render::sql_predicate(p, &declared));
    }
    out
}

fn relational_write(classes: &[LocalClassDef], sw: &SubWrite) -> String {
    let declared = declared(classes, &sw.local_class);
    let table = sql_ident(sw.local_class.as_str());
    let mut out = match sw.kind {
        WriteKind::Insert => {
            let names: Vec<String> = sw.values.iter().map(|(n, _)| sql_ident(n.as_str())).collect();
            let vals: Vec<String> = sw.values.iter().map(|(_, v)| sql_literal(v)).collect();
            return format!("INSERT INTO {table} ({}) VALUES ({})", names.join(", "), vals.join(", "));
        }
        WriteKind::Update => {
            let sets: Vec<String> =
                sw.values.iter().map(|(n, v)| format!("{} = {}", sql_ident(n.as_str()), sql_literal(v))).collect();
            format!("UPDATE {table} SET {}", sets.join(", "))
        }
        WriteKind::Delete => format!("DELETE FROM {table}"),
    };
    if let Some(p) = &sw.predicate {
        out.push_str(" WHERE ");
        out.push_str(&render::sql_predicate(p, &declared));
    }
    out
}

fn document_query(sq: &SubQuery) -> String {
    format!(
        "db.{}.find({}, {})",
        sq.local_class,
        render::mongo_filter(sq.predicate.as_ref()),
        render::mongo_projection(&sq.columns)
    )
}

fn document_write(sw: &SubWrite) -> String {
    let doc = || serde_json::Value::Object(sw.values.iter().map(|(n, v)| (n.to_string(), v.to_json())).collect());
    let filter = render::mongo_filter(sw.predicate.as_ref());
    match sw.kind {
        WriteKind::Insert => format!("db.{}.insertOne({})", sw.local_class, doc()),
        WriteKind::Update => format!("db.{}.updateMany({filter}, {})", sw.local_class, json!({ "$set": doc() })),
        WriteKind::Delete => format!("db.{}.deleteMany({filter})", sw.local_class),
    }
}

fn csv_query(sq: &SubQuery) -> String {
    let cols: Vec<&str> = sq.columns.iter().map(|c| c.name.as_str()).collect();
    let mut out = format!("SCAN {} COLUMNS {}", file_name(&sq.local_class, "csv"), cols.join(", "));
    if let Some(p) = &sq.predicate {
        out.push_str(" WHERE ");
        out.push_str(&render::file_predicate(p));
    }
    out
}

fn csv_write(sw: &SubWrite) -> String {
    let file = file_name(&sw.local_class, "csv");
    let pairs = || sw.values.iter().map(|(n, v)| format!("{n} = {}", v.to_literal())).collect::<Vec<_>>().join(", ");
    let mut out = match sw.kind {
        WriteKind::Insert => return format!("APPEND {file} {}", pairs()),
        WriteKind::Update => format!("REWRITE {file} SET {}", pairs()),
        WriteKind::Delete => format!("REMOVE FROM {file}"),
    };
    if let Some(p) = &sw.predicate {
        out.push_str(" WHERE ");
        out.push_str(&render::file_predicate(p));
    }
    out
}

/// Local-language text of a sub-query at a site of the given kind. Needs
/// only the site's class declarations, so it works for remote sites too.
pub fn translate_query(kind: AdapterKind, classes: &[LocalClassDef], sq: &SubQuery) -> String {
    match kind {
        AdapterKind::Relational => relational_query(classes, sq),
        AdapterKind::Document => document_query(sq),
        AdapterKind::Csv => csv_query(sq),
    }
}

pub fn translate_write(kind: AdapterKind, classes: &[LocalClassDef], sw: &SubWrite) -> String {
    match kind {
        AdapterKind::Relational => relational_write(classes, sw),
        AdapterKind::Document => document_write(sw),
        AdapterKind::Csv => csv_write(sw),
    }
}

/// Opens the adapter of the given kind over the store directory `dir`.
pub fn open_adapter(
    kind: AdapterKind,
    site: Ident,
    dir: &Path,
    classes: Vec<LocalClassDef>,
) -> Result<Arc<dyn Adapter>, AdapterError> {
    Ok(match kind {
        AdapterKind::Relational => Arc::new(RelationalAdapter::open(site, dir, classes)?),
        AdapterKind::Document => Arc::new(DocumentAdapter::open(site, dir, classes)?),
        AdapterKind::Csv => Arc::new(CsvAdapter::open(site, dir, classes)?),
    })
}

/// Writes `rows` (local representation, declared attribute order) as a store
/// the given adapter kind can open. Used to seed sites.
pub fn write_store(kind: AdapterKind, dir: &Path, class: &LocalClassDef, rows: &[Vec<Value>]) -> Result<(), AdapterError> {
    fs::create_dir_all(dir).map_err(|e| write_failed(dir, e))?;
    let columns: Vec<Ident> = class.attributes.iter().map(|a| a.name.clone()).collect();
    match kind {
        AdapterKind::Document => {
            let cells = rows.iter().map(|r| r.iter().map(|v| (!v.is_null()).then(|| Cell::json(v))).collect()).collect();
            let t = Table { columns, rows: cells };
            let a = DocumentAdapter { site: "seed".into(), dir: dir.to_path_buf(), classes: Classes::open(dir, vec![])? };
            a.store(&class.name, &t)
        }
        AdapterKind::Relational | AdapterKind::Csv => {
            let cells = rows.iter().map(|r| r.iter().map(|v| Some(Cell::text(v))).collect()).collect();
            write_csv(&dir.join(file_name(&class.name, "csv")), &Table { columns, rows: cells })
        }
    }
}
