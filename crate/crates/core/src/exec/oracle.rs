//! Brute-force reference semantics. Deliberately shares nothing with the
//! decomposer or composer beyond value-level comparison: every fragment is
//! pulled raw, mapped here, and each query is a plain scan of the result.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::{Column, ExecError, ExecOptions, Outcome, PerSiteStatus, ResultSet, Row, SiteSet};
use crate::catalog::{Catalog, Fragment, MappingKind, MappingRule, VirtualClass};
use crate::decompose::{LocalColumn, Purpose, SubQuery};
use crate::gql::{SortDir, TypedStatement};
use crate::value::{Ident, Value};

/// The full global extension of every class with a live mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterializedDb {
    pub classes: HashMap<Ident, ResultSet>,
}

impl MaterializedDb {
    pub fn extension(&self, class: &str) -> Option<&ResultSet> {
        self.classes.get(&Ident::from(class))
    }
}

/// Rows of one fragment in global form, class attribute order; `None` for unmapped.
struct FragmentRows {
    mapped: Vec<bool>,
    rows: Vec<Row>,
}

fn raw_pull(c: &Catalog, f: &Fragment) -> (SubQuery, Vec<Ident>) {
    let lc = c.local_class(f.site.as_str(), f.local_class.as_str());
    let mut columns: Vec<LocalColumn> = Vec::new();
    for m in &f.attr_maps {
        let Some(la) = lc.and_then(|lc| lc.attribute(m.local.as_str())) else { continue };
        if !columns.iter().any(|c| c.name == la.name) {
            columns.push(LocalColumn { name: la.name.clone(), ty: la.ty, cast: None, default: None });
        }
    }
    let names = columns.iter().map(|c| c.name.clone()).collect();
    let sq = SubQuery {
        site: f.site.clone(),
        local_class: f.local_class.clone(),
        columns,
        predicate: None,
        guards: Vec::new(),
        purpose: Purpose::Data,
    };
    (sq, names)
}

fn to_global(class: &VirtualClass, f: &Fragment, pulled: &[Ident], raw: &Row) -> Option<Row> {
    let mut out = Vec::with_capacity(class.attributes.len());
    for a in &class.attributes {
        let Some(m) = f.map_for_global(a.name.as_str()) else {
            out.push(Value::Null);
            continue;
        };
        let local = pulled.iter().position(|p| *p == m.local).map(|i| raw[i].clone()).unwrap_or(Value::Null);
        let mut v = match m.cast {
            Some(cast) => cast.apply(&local)?,
            None => local,
        };
        if v.is_null() {
            if let Some(d) = &m.default {
                v = d.coerce_to(a.ty)?;
            }
        }
        out.push(v);
    }
    Some(out)
}

async fn pull_fragment(
    c: &Catalog,
    class: &VirtualClass,
    f: &Fragment,
    sites: &SiteSet,
    opts: &ExecOptions,
) -> Result<FragmentRows, PerSiteStatus> {
    let (sq, pulled) = raw_pull(c, f);
    let failed = |outcome, message: String| PerSiteStatus {
        site: f.site.clone(),
        outcome,
        count: 0,
        skipped_casts: 0,
        elapsed_ms: 0,
        message,
    };
    let client = sites.get(&f.site).ok_or_else(|| failed(Outcome::Timeout, "no connection".into()))?;
    let reply = match tokio::time::timeout(opts.timeout, client.run_subquery(&sq)).await {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => return Err(failed(Outcome::AdapterError, e.to_string())),
        Err(_) => return Err(failed(Outcome::Timeout, "timeout".into())),
    };
    Ok(FragmentRows {
        mapped: class.attributes.iter().map(|a| f.maps_global(a.name.as_str())).collect(),
        rows: reply.rows.iter().filter_map(|raw| to_global(class, f, &pulled, raw)).collect(),
    })
}

fn combine(class: &VirtualClass, rule: &MappingRule, parts: Vec<FragmentRows>) -> Vec<Row> {
    match rule.kind {
        MappingKind::Horizontal => parts.into_iter().flat_map(|p| p.rows).collect(),
        MappingKind::Vertical => {
            let key = rule.join_key.as_ref().and_then(|k| class.position(k.as_str())).expect("join key");
            let mut parts = parts.into_iter();
            let Some(first) = parts.next() else { return Vec::new() };
            let mut owned = first.mapped.clone();
            let mut acc = first.rows;
            for p in parts {
                let mut next = Vec::new();
                for l in &acc {
                    for r in &p.rows {
                        if l[key].is_null() || r[key].is_null() || l[key] != r[key] {
                            continue;
                        }
                        let row: Row = (0..l.len())
                            .map(|i| if !owned[i] && p.mapped[i] { r[i].clone() } else { l[i].clone() })
                            .collect();
                        next.push(row);
                    }
                }
                for (o, m) in owned.iter_mut().zip(&p.mapped) {
                    *o |= *m;
                }
                acc = next;
            }
            acc
        }
    }
}

/// Pulls every fragment of every live mapping in full and assembles each
/// class's global extension.
pub async fn materialize(snapshot: &Catalog, sites: &SiteSet, opts: &ExecOptions) -> Result<MaterializedDb, ExecError> {
    let mut db = MaterializedDb::default();
    let mut failures = Vec::new();
    for rule in snapshot.mappings.iter().filter(|m| !m.stale) {
        let Some(class) = snapshot.class(rule.class.as_str()) else { continue };
        let mut parts = Vec::new();
        for f in &rule.fragments {
            match pull_fragment(snapshot, class, f, sites, opts).await {
                Ok(p) => parts.push(p),
                Err(s) => failures.push(s),
            }
        }
        let columns = class.attributes.iter().map(|a| Column { name: a.name.clone(), ty: a.ty }).collect();
        db.classes.insert(class.name.clone(), ResultSet { columns, rows: combine(class, rule, parts) });
    }
    if failures.is_empty() {
        Ok(db)
    } else {
        Err(ExecError::SiteUnavailable(failures))
    }
}

fn order(a: &Value, b: &Value) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => a.sort_cmp(b),
    }
}

/// Evaluates a SELECT by scanning the materialized extension directly.
pub fn reference_evaluate(ts: &TypedStatement, db: &MaterializedDb) -> ResultSet {
    let sel = ts.as_select().expect("reference_evaluate takes a SELECT");
    let attrs = &sel.class.attributes;
    let ext = db.extension(sel.class.name.as_str()).map(|r| r.rows.as_slice()).unwrap_or(&[]);
    let pos = |name: &Ident| attrs.iter().position(|a| a.name == *name);

    let mut rows: Vec<&Row> = ext
        .iter()
        .filter(|row| match &sel.predicate {
            Some(p) => p.eval(&|a: &Ident| pos(a).map(|i| &row[i])),
            None => true,
        })
        .collect();
    if let Some(o) = &sel.order_by {
        let i = pos(&o.attr).expect("validated order attribute");
        rows.sort_by(|a, b| match o.dir {
            SortDir::Asc => order(&a[i], &b[i]),
            SortDir::Desc => order(&b[i], &a[i]),
        });
    }
    if let Some(n) = sel.limit {
        rows.truncate(usize::try_from(n).unwrap_or(usize::MAX));
    }
    let idx: Vec<usize> = sel.projection.iter().map(|a| pos(&a.name).expect("validated projection")).collect();
    ResultSet {
        columns: sel.projection.iter().map(|a| Column { name: a.name.clone(), ty: a.ty }).collect(),
        rows: rows.into_iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect(),
    }
}
