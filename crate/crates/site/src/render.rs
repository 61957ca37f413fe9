//! Rendering of local predicates and values as text in each site's own language.

use mdbs_core::decompose::{LocalColumn, LocalOperand, LocalPredicate};
use mdbs_core::value::format_float;
use mdbs_core::{CanonicalType, CmpOp, Value};
use serde_json::json;

const SQL_RESERVED: &[&str] = &[
    "AND", "AS", "BY", "CAST", "DELETE", "FROM", "GROUP", "IN", "INDEX", "INSERT", "IS", "JOIN", "KEY", "LIMIT", "NOT",
    "NULL", "ON", "OR", "ORDER", "SELECT", "SET", "TABLE", "UPDATE", "VALUES", "WHERE",
];

pub fn sql_ident(name: &str) -> String {
    let plain = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain && !SQL_RESERVED.iter().any(|k| k.eq_ignore_ascii_case(name)) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

pub fn sql_type(ty: CanonicalType) -> &'static str {
    match ty {
        CanonicalType::Int => "INTEGER",
        CanonicalType::Float => "DOUBLE",
        CanonicalType::String => "VARCHAR",
        CanonicalType::Bool => "BOOLEAN",
    }
}

/// Canonical type of a SQL native type name, ignoring length/precision.
pub fn sql_native(native: &str) -> Option<CanonicalType> {
    let base = native.split('(').next().unwrap_or("").trim().to_ascii_uppercase();
    Some(match base.as_str() {
        "INT" | "INTEGER" | "BIGINT" | "SMALLINT" | "TINYINT" => CanonicalType::Int,
        "FLOAT" | "REAL" | "DOUBLE" | "DOUBLE PRECISION" | "DECIMAL" | "NUMERIC" => CanonicalType::Float,
        "VARCHAR" | "CHAR" | "TEXT" | "STRING" | "CLOB" => CanonicalType::String,
        "BOOL" | "BOOLEAN" => CanonicalType::Bool,
        _ => return None,
    })
}

pub fn sql_literal(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(*f),
        Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Bool(b) => if *b { "TRUE" } else { "FALSE" }.into(),
    }
}

fn sql_op(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Ne => "<>",
        other => other.symbol(),
    }
}

/// `declared` tells whether the local class has the column; undeclared
/// columns read as NULL.
pub fn sql_column(c: &LocalColumn, declared: &dyn Fn(&str) -> bool) -> String {
    let mut e = if declared(c.name.as_str()) { sql_ident(c.name.as_str()) } else { "NULL".into() };
    if let Some(cast) = c.cast.filter(|k| k.from != k.to) {
        e = format!("CAST({e} AS {})", sql_type(cast.to));
    }
    if let Some(d) = &c.default {
        e = format!("COALESCE({e}, {})", sql_literal(d));
    }
    e
}

/// Disjunctive normal form rendered with explicit grouping.
pub fn predicate_text(p: &LocalPredicate, column: &dyn Fn(&LocalColumn) -> String, op: fn(CmpOp) -> &'static str, lit: fn(&Value) -> String) -> String {
    let conj: Vec<String> = p
        .disjuncts
        .iter()
        .map(|c| {
            let parts: Vec<String> = c
                .iter()
                .map(|cmp| {
                    let rhs = match &cmp.rhs {
                        LocalOperand::Value(v) => lit(v),
                        LocalOperand::Column(col) => column(col),
                    };
                    format!("{} {} {rhs}", column(&cmp.column), op(cmp.op))
                })
                .collect();
            if parts.len() > 1 && p.disjuncts.len() > 1 {
                format!("({})", parts.join(" AND "))
            } else {
                parts.join(" AND ")
            }
        })
        .collect();
    conj.join(" OR ")
}

pub fn sql_predicate(p: &LocalPredicate, declared: &dyn Fn(&str) -> bool) -> String {
    predicate_text(p, &|c| sql_column(c, declared), sql_op, sql_literal)
}

/// Plain-text form used by file-backed sites.
pub fn file_predicate(p: &LocalPredicate) -> String {
    let column = |c: &LocalColumn| {
        let mut e = c.name.to_string();
        if let Some(cast) = c.cast.filter(|k| k.from != k.to) {
            e = format!("{e} AS {}", cast.to);
        }
        if let Some(d) = &c.default {
            e = format!("{e} ELSE {}", d.to_literal());
        }
        e
    };
    predicate_text(p, &column, CmpOp::symbol, Value::to_literal)
}

fn mongo_op(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "$eq",
        CmpOp::Ne => "$ne",
        CmpOp::Lt => "$lt",
        CmpOp::Le => "$lte",
        CmpOp::Gt => "$gt",
        CmpOp::Ge => "$gte",
    }
}

fn mongo_column(c: &LocalColumn) -> serde_json::Value {
    let mut e = json!(format!("${}", c.name));
    if let Some(cast) = c.cast.filter(|k| k.from != k.to) {
        let to = match cast.to {
            CanonicalType::Int => "long",
            CanonicalType::Float => "double",
            CanonicalType::String => "string",
            CanonicalType::Bool => "bool",
        };
        e = json!({ "$convert": { "input": e, "to": to } });
    }
    if let Some(d) = &c.default {
        e = json!({ "$ifNull": [e, d.to_json()] });
    }
    e
}

/// A document-store filter expression.
pub fn mongo_filter(p: Option<&LocalPredicate>) -> serde_json::Value {
    let Some(p) = p else { return json!({}) };
    let disj: Vec<serde_json::Value> = p
        .disjuncts
        .iter()
        .map(|conj| {
            let parts: Vec<serde_json::Value> = conj
                .iter()
                .map(|cmp| {
                    let rhs = match &cmp.rhs {
                        LocalOperand::Value(v) => v.to_json(),
                        LocalOperand::Column(c) => mongo_column(c),
                    };
                    json!({ mongo_op(cmp.op): [mongo_column(&cmp.column), rhs] })
                })
                .collect();
            json!({ "$and": parts })
        })
        .collect();
    json!({ "$expr": { "$or": disj } })
}

pub fn mongo_projection(cols: &[LocalColumn]) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    m.insert("_id".into(), json!(0));
    for c in cols {
        m.insert(c.name.to_string(), json!(1));
    }
    serde_json::Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_and_idents() {
        assert_eq!(sql_literal(&Value::Str("O'Hara".into())), "'O''Hara'");
        assert_eq!(sql_literal(&Value::Float(50000.0)), "50000.0");
        assert_eq!(sql_ident("ENAME"), "ENAME");
        assert_eq!(sql_ident("limit"), "\"limit\"");
        assert_eq!(sql_ident("a b"), "\"a b\"");
    }

    #[test]
    fn native_names() {
        assert_eq!(sql_native("VARCHAR(40)"), Some(CanonicalType::String));
        assert_eq!(sql_native("decimal(10,2)"), Some(CanonicalType::Float));
        assert_eq!(sql_native("GEOMETRY"), None);
    }
}
