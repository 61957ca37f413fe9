use std::collections::HashMap;

use thiserror::Error;

use super::{Column, ResultSet, Row};
use crate::decompose::{CompositionNode, DecompositionPlan};
use crate::gql::SortDir;
use crate::value::{Ident, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("site {site} returned rows that do not match its sub-query: {detail}")]
    SchemaDrift { site: String, detail: String },
}

struct Relation {
    columns: Vec<Ident>,
    rows: Vec<Row>,
}

impl Relation {
    fn index(&self, name: &Ident) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Evaluates the plan's composition tree over sub-query results, indexed like
/// `plan.subqueries`. A `None` result (a failed site in partial mode) reads as empty.
pub fn compose(plan: &DecompositionPlan, results: &[Option<Vec<Row>>]) -> Result<ResultSet, ComposeError> {
    let rel = eval(&plan.composition, plan, results)?;
    let columns = plan.output.iter().map(|a| Column { name: a.name.clone(), ty: a.ty }).collect();
    Ok(ResultSet { columns, rows: rel.rows })
}

fn eval(node: &CompositionNode, plan: &DecompositionPlan, results: &[Option<Vec<Row>>]) -> Result<Relation, ComposeError> {
    Ok(match node {
        CompositionNode::Scan { subquery, site, columns } => {
            let sq = &plan.subqueries[*subquery];
            let rows = results.get(*subquery).cloned().flatten().unwrap_or_default();
            for row in &rows {
                let ok = row.len() == sq.columns.len() && row.iter().zip(&sq.columns).all(|(v, c)| v.conforms_to(c.ty));
                if !ok {
                    return Err(ComposeError::SchemaDrift {
                        site: site.to_string(),
                        detail: format!("expected {} columns of types {:?}, got {row:?}", sq.columns.len(), sq.columns.iter().map(|c| c.ty).collect::<Vec<_>>()),
                    });
                }
            }
            Relation { columns: columns.clone(), rows }
        }
        CompositionNode::UnionAll { columns, inputs } => {
            let mut rows = Vec::new();
            for input in inputs {
                let r = eval(input, plan, results)?;
                let idx: Vec<Option<usize>> = columns.iter().map(|c| r.index(c)).collect();
                rows.extend(r.rows.into_iter().map(|row| {
                    idx.iter().map(|i| i.map(|i| row[i].clone()).unwrap_or(Value::Null)).collect::<Row>()
                }));
            }
            Relation { columns: columns.clone(), rows }
        }
        CompositionNode::JoinOn { key, inputs } => {
            let mut rels = inputs.iter().map(|i| eval(i, plan, results));
            let mut acc = match rels.next() {
                Some(r) => r?,
                None => Relation { columns: Vec::new(), rows: Vec::new() },
            };
            for next in rels {
                acc = hash_join(acc, next?, key);
            }
            acc
        }
        CompositionNode::Filter { predicate, input } => {
            let mut r = eval(input, plan, results)?;
            let cols = r.columns.clone();
            r.rows.retain(|row| predicate.eval(&|a: &Ident| cols.iter().position(|c| c == a).map(|i| &row[i])));
            r
        }
        CompositionNode::Sort { attr, dir, input } => {
            let mut r = eval(input, plan, results)?;
            if let Some(i) = r.index(attr) {
                match dir {
                    SortDir::Asc => r.rows.sort_by(|a, b| a[i].sort_cmp(&b[i])),
                    SortDir::Desc => r.rows.sort_by(|a, b| b[i].sort_cmp(&a[i])),
                }
            }
            r
        }
        CompositionNode::Limit { n, input } => {
            let mut r = eval(input, plan, results)?;
            r.rows.truncate(usize::try_from(*n).unwrap_or(usize::MAX));
            r
        }
        CompositionNode::Project { attrs, input } => {
            let r = eval(input, plan, results)?;
            let idx: Vec<Option<usize>> = attrs.iter().map(|a| r.index(a)).collect();
            let rows = r
                .rows
                .into_iter()
                .map(|row| idx.iter().map(|i| i.map(|i| row[i].clone()).unwrap_or(Value::Null)).collect())
                .collect();
            Relation { columns: attrs.clone(), rows }
        }
    })
}

/// Inner equi-join; NULL keys never match. Output follows left order, then right order.
fn hash_join(left: Relation, right: Relation, key: &Ident) -> Relation {
    let (Some(lk), Some(rk)) = (left.index(key), right.index(key)) else {
        return Relation { columns: left.columns, rows: Vec::new() };
    };
    let mut by_key: HashMap<&Value, Vec<usize>> = HashMap::new();
    for (i, row) in right.rows.iter().enumerate() {
        if !row[rk].is_null() {
            by_key.entry(&row[rk]).or_default().push(i);
        }
    }
    let keep: Vec<usize> = (0..right.columns.len()).filter(|&i| !left.columns.contains(&right.columns[i])).collect();
    let mut columns = left.columns.clone();
    columns.extend(keep.iter().map(|&i| right.columns[i].clone()));
    let mut rows = Vec::new();
    for l in &left.rows {
        if let Some(matches) = by_key.get(&l[lk]) {
            for &m in matches {
                let mut row = l.clone();
                row.extend(keep.iter().map(|&i| right.rows[m][i].clone()));
                rows.push(row);
            }
        }
    }
    Relation { columns, rows }
}
