//! Shared fixtures and an in-memory site for tests.

use std::collections::HashMap;

use async_trait::async_trait;
use parking_lot::Mutex;

use crate::catalog::LocalSchemaDescriptor;
use crate::decompose::{RowRead, SubQuery, SubWrite, WriteKind};
use crate::exec::{Row, SiteClient, SiteError, SiteReply};
use crate::value::{Ident, Value};

/// The canonical "acme" catalog: Employee split horizontally over `hq` and
/// `branch`, Customer split vertically over `hq` and `fin`.
pub const ACME_CATALOG: &str = include_str!("../../../fixtures/acme/catalog.json");

/// Declarations from which the pipeline derives the acme classes and mappings.
pub const ACME_PIPELINE: &str = include_str!("../../../fixtures/acme/pipeline.json");

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<Ident>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(columns: &[&str], rows: Vec<Row>) -> Self {
        Table { columns: columns.iter().map(|c| Ident::from(*c)).collect(), rows }
    }

    fn getter<'a>(&'a self, row: &'a Row) -> impl Fn(&Ident) -> Value + 'a {
        move |c: &Ident| self.columns.iter().position(|x| x == c).map(|i| row[i].clone()).unwrap_or(Value::Null)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Behaviour {
    #[default]
    Answer,
    Deny,
    /// Never answers.
    Silent,
}

/// A site whose local classes are plain in-memory tables.
#[derive(Debug, Default)]
pub struct MemorySite {
    pub tables: Mutex<HashMap<Ident, Table>>,
    pub behaviour: Behaviour,
}

impl MemorySite {
    pub fn new(tables: Vec<(&str, Table)>) -> Self {
        MemorySite {
            tables: Mutex::new(tables.into_iter().map(|(n, t)| (Ident::from(n), t)).collect()),
            behaviour: Behaviour::Answer,
        }
    }

    pub fn with_behaviour(mut self, b: Behaviour) -> Self {
        self.behaviour = b;
        self
    }

    async fn gate(&self) -> Result<(), SiteError> {
        match self.behaviour {
            Behaviour::Answer => Ok(()),
            Behaviour::Deny => Err(SiteError::Denied("policy".into())),
            Behaviour::Silent => std::future::pending().await,
        }
    }
}

#[async_trait]
impl SiteClient for MemorySite {
    async fn run_subquery(&self, sq: &SubQuery) -> Result<SiteReply, SiteError> {
        self.gate().await?;
        let tables = self.tables.lock();
        let t = tables.get(&sq.local_class).ok_or_else(|| SiteError::Adapter(format!("no table {}", sq.local_class)))?;
        let mut reply = SiteReply::default();
        for row in &t.rows {
            match sq.read_row(t.getter(row)) {
                RowRead::Row(r) => reply.rows.push(r),
                RowRead::Skipped => reply.skipped_casts += 1,
                RowRead::Rejected => {}
            }
        }
        Ok(reply)
    }

    async fn apply_write(&self, sw: &SubWrite) -> Result<SiteReply, SiteError> {
        self.gate().await?;
        let mut tables = self.tables.lock();
        let t = tables.get_mut(&sw.local_class).ok_or_else(|| SiteError::Adapter(format!("no table {}", sw.local_class)))?;
        let matches = |t: &Table, row: &Row| sw.predicate.as_ref().is_none_or(|p| p.matches(&t.getter(row)) == Some(true));
        let mut affected = 0;
        match sw.kind {
            WriteKind::Insert => {
                let row = t
                    .columns
                    .iter()
                    .map(|c| sw.values.iter().find(|(n, _)| n == c).map(|(_, v)| v.clone()).unwrap_or(Value::Null))
                    .collect();
                t.rows.push(row);
                affected = 1;
            }
            WriteKind::Update => {
                for i in 0..t.rows.len() {
                    if matches(t, &t.rows[i]) {
                        for (n, v) in &sw.values {
                            if let Some(ci) = t.columns.iter().position(|c| c == n) {
                                t.rows[i][ci] = v.clone();
                            }
                        }
                        affected += 1;
                    }
                }
            }
            WriteKind::Delete => {
                let before = t.rows.len();
                let keep: Vec<Row> = t.rows.iter().filter(|r| !matches(t, r)).cloned().collect();
                t.rows = keep;
                affected = (before - t.rows.len()) as u64;
            }
        }
        Ok(SiteReply { affected, ..SiteReply::default() })
    }

    async fn local_schema(&self) -> Result<LocalSchemaDescriptor, SiteError> {
        Err(SiteError::Adapter("memory sites do not describe themselves".into()))
    }
}
