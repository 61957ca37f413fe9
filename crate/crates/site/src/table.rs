//! Record-level evaluation shared by all adapters. A store is loaded into a
//! [`Table`] of raw cells; sub-queries and sub-writes run against it.

use std::collections::HashSet;

use mdbs_core::catalog::LocalClassDef;
use mdbs_core::decompose::{RowRead, SubQuery, SubWrite, WriteKind};
use mdbs_core::exec::SiteReply;
use mdbs_core::value::{format_float, parse_strict};
use mdbs_core::{CanonicalType, Ident, Value};

/// A stored value before it is read in its declared local type.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Text from a CSV-backed store. The empty string is NULL.
    Text(String),
    Json(serde_json::Value),
}

impl Cell {
    /// `None` when the stored value cannot be read as `ty`.
    pub fn read(&self, ty: CanonicalType) -> Option<Value> {
        match self {
            Cell::Text(s) if s.is_empty() => Some(Value::Null),
            Cell::Text(s) => parse_strict(s, ty),
            Cell::Json(j) => json_value(j, ty),
        }
    }

    pub fn text(v: &Value) -> Cell {
        Cell::Text(match v {
            Value::Null => String::new(),
            Value::Float(f) => format_float(*f),
            other => other.to_string(),
        })
    }

    pub fn json(v: &Value) -> Cell {
        Cell::Json(v.to_json())
    }
}

/// JSON numbers are normalised to the declared type; everything else must
/// already have the matching JSON kind.
fn json_value(j: &serde_json::Value, ty: CanonicalType) -> Option<Value> {
    use serde_json::Value as J;
    match (j, ty) {
        (J::Null, _) => Some(Value::Null),
        (J::Number(n), CanonicalType::Int) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 9.0e15).map(|f| f as i64))
            .map(Value::Int),
        (J::Number(n), CanonicalType::Float) => n.as_f64().map(Value::Float),
        (J::String(s), CanonicalType::String) => Some(Value::Str(s.clone())),
        (J::Bool(b), CanonicalType::Bool) => Some(Value::Bool(*b)),
        _ => None,
    }
}

/// One local class loaded from a store. `columns` follows the store's own
/// layout (CSV header or first-seen document fields), not the declaration.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<Ident>,
    pub rows: Vec<Vec<Option<Cell>>>,
}

impl Table {
    fn position(&self, name: &Ident) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Reads every column of a row in its declared type. Undeclared or absent
    /// columns read as NULL; `None` marks an unreadable cell.
    fn typed(&self, class: &LocalClassDef, row: &[Option<Cell>]) -> Vec<(Ident, Option<Value>)> {
        class
            .attributes
            .iter()
            .map(|a| {
                let v = match self.position(&a.name).and_then(|i| row.get(i)).and_then(|c| c.as_ref()) {
                    None => Some(Value::Null),
                    Some(c) => c.read(a.ty),
                };
                (a.name.clone(), v)
            })
            .collect()
    }

    pub fn scan(&self, class: &LocalClassDef, sq: &SubQuery) -> SiteReply {
        let needed = referenced(sq);
        let mut reply = SiteReply::default();
        for row in &self.rows {
            let typed = self.typed(class, row);
            if typed.iter().any(|(n, v)| v.is_none() && needed.contains(n)) {
                reply.skipped_casts += 1;
                continue;
            }
            match sq.read_row(getter(&typed)) {
                RowRead::Row(r) => reply.rows.push(r),
                RowRead::Skipped => reply.skipped_casts += 1,
                RowRead::Rejected => {}
            }
        }
        reply
    }

    /// Applies a write in place. `cell` renders a local value in the store's
    /// representation. Returns the number of records affected.
    pub fn apply(&mut self, class: &LocalClassDef, sw: &SubWrite, cell: fn(&Value) -> Cell) -> u64 {
        for (name, _) in &sw.values {
            if self.position(name).is_none() {
                self.columns.push(name.clone());
                for r in &mut self.rows {
                    r.push(None);
                }
            }
        }
        if sw.kind == WriteKind::Insert {
            let row = self
                .columns
                .iter()
                .map(|c| sw.values.iter().find(|(n, _)| n == c).map(|(_, v)| cell(v)))
                .collect();
            self.rows.push(row);
            return 1;
        }
        let hits: Vec<usize> = (0..self.rows.len())
            .filter(|&i| {
                let typed = self.typed(class, &self.rows[i]);
                let pred = sw.predicate.as_ref();
                let cols: HashSet<&Ident> = pred.map(|p| p.columns().map(|c| &c.name).collect()).unwrap_or_default();
                if typed.iter().any(|(n, v)| v.is_none() && cols.contains(n)) {
                    return false;
                }
                pred.is_none_or(|p| p.matches(&getter(&typed)) == Some(true))
            })
            .collect();
        match sw.kind {
            WriteKind::Update => {
                for &i in &hits {
                    for (name, v) in &sw.values {
                        let ci = self.position(name).expect("column added above");
                        self.rows[i][ci] = Some(cell(v));
                    }
                }
            }
            WriteKind::Delete => {
                let mut i = 0;
                self.rows.retain(|_| {
                    let keep = !hits.contains(&i);
                    i += 1;
                    keep
                });
            }
            WriteKind::Insert => unreachable!(),
        }
        hits.len() as u64
    }
}

fn getter(typed: &[(Ident, Option<Value>)]) -> impl Fn(&Ident) -> Value + '_ {
    move |name: &Ident| {
        typed
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, v)| v.clone())
            .unwrap_or(Value::Null)
    }
}

fn referenced(sq: &SubQuery) -> HashSet<&Ident> {
    let mut out: HashSet<&Ident> = sq.columns.iter().chain(&sq.guards).map(|c| &c.name).collect();
    if let Some(p) = &sq.predicate {
        out.extend(p.columns().map(|c| &c.name));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_cells() {
        assert_eq!(Cell::Text(String::new()).read(CanonicalType::Int), Some(Value::Null));
        assert_eq!(Cell::Text("7".into()).read(CanonicalType::Int), Some(Value::Int(7)));
        assert_eq!(Cell::Text("7".into()).read(CanonicalType::Float), Some(Value::Float(7.0)));
        assert_eq!(Cell::Text("x".into()).read(CanonicalType::Int), None);
        assert_eq!(Cell::text(&Value::Float(1000.0)), Cell::Text("1000.0".into()));
    }

    #[test]
    fn json_cells() {
        let j = |s: &str| Cell::Json(serde_json::from_str(s).unwrap());
        assert_eq!(j("5").read(CanonicalType::Float), Some(Value::Float(5.0)));
        assert_eq!(j("5.0").read(CanonicalType::Int), Some(Value::Int(5)));
        assert_eq!(j("5.5").read(CanonicalType::Int), None);
        assert_eq!(j("\"5\"").read(CanonicalType::Int), None);
        assert_eq!(j("[1]").read(CanonicalType::String), None);
        assert_eq!(j("null").read(CanonicalType::Bool), Some(Value::Null));
    }
}
