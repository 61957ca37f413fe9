//! Rewrites validated global statements into per-site sub-queries and
//! sub-writes, plus the composition tree that reassembles the answer.

mod explain;
mod local;
mod plan;

pub use explain::{explain, explain_write, ExplainDoc, ExplainedSubQuery};
pub use local::RowRead;
pub use plan::*;

use thiserror::Error;

use crate::catalog::{AttributeDef, Catalog, Fragment, MappingKind, MappingRule};
use crate::gql::{Comparison, Operand, Predicate, TypedSelect, TypedStatement, TypedWrite, WriteOp};
use crate::value::{Ident, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("mapping for {0} is stale; re-run schema integration")]
    StaleMapping(String),
    #[error("no mapping rule for class {0}")]
    MissingMapping(String),
    #[error("no fragment of {0} accepts the inserted row")]
    NoRoute(String),
    #[error("inserted row matches several fragments of {class}: {sites:?}")]
    AmbiguousRoute { class: String, sites: Vec<String> },
    #[error("predicate cannot be fully evaluated at site {site}: {residual}")]
    UnsupportedResidualWrite { site: String, residual: String },
    #[error("site {site} does not map attribute {attr}")]
    UnmappedWriteAttribute { site: String, attr: String },
    #[error("local column {site}.{column} is required but receives no value")]
    MissingLocalValue { site: String, column: String },
    #[error("value {value} for {attr} has no representation at site {site}")]
    InverseCast { site: String, attr: String, value: String },
    #[error("statement is not a {0}")]
    WrongStatement(&'static str),
}

impl DecomposeError {
    pub fn kind(&self) -> &'static str {
        match self {
            DecomposeError::StaleMapping(_) => "STALE_MAPPING",
            DecomposeError::MissingMapping(_) => "UNKNOWN_CLASS",
            DecomposeError::NoRoute(_) => "NO_ROUTE",
            DecomposeError::AmbiguousRoute { .. } => "AMBIGUOUS_ROUTE",
            DecomposeError::UnsupportedResidualWrite { .. } => "UNSUPPORTED_RESIDUAL_WRITE",
            DecomposeError::UnmappedWriteAttribute { .. } => "UNMAPPED_WRITE_ATTRIBUTE",
            DecomposeError::MissingLocalValue { .. } => "UNMAPPED_WRITE_ATTRIBUTE",
            DecomposeError::InverseCast { .. } => "TYPE_MISMATCH",
            DecomposeError::WrongStatement(_) => "INVALID_STATEMENT",
        }
    }
}

/// Splits `p` for fragment `f`: the part `f` can evaluate over the attributes
/// it maps, and the part that must be re-checked after composition.
///
/// A single conjunction is split conjunct by conjunct. A disjunction moves as a
/// whole: pushed when every attribute it touches is mapped, residual otherwise.
pub fn split_predicate(p: &Predicate, f: &Fragment) -> (Option<Predicate>, Option<Predicate>) {
    split_with(p, &|a| f.maps_global(a.as_str()))
}

fn split_with(p: &Predicate, local: &impl Fn(&Ident) -> bool) -> (Option<Predicate>, Option<Predicate>) {
    match p.as_conjunction() {
        Some(conjuncts) => {
            let (pushed, residual): (Vec<Comparison>, Vec<Comparison>) =
                conjuncts.iter().cloned().partition(|c| c.attrs().all(local));
            (Predicate::conjunction(pushed), Predicate::conjunction(residual))
        }
        None if p.attrs().all(local) => (Some(p.clone()), None),
        None => (None, Some(p.clone())),
    }
}

/// Fragment index that sources each global attribute of a vertical class:
/// the first fragment in declaration order that maps it.
fn owners(rule: &MappingRule, attrs: &[AttributeDef]) -> Vec<Option<usize>> {
    attrs
        .iter()
        .map(|a| rule.fragments.iter().position(|f| f.maps_global(a.name.as_str())))
        .collect()
}

fn column(f: &Fragment, attr: &AttributeDef) -> Option<LocalColumn> {
    let m = f.map_for_global(attr.name.as_str())?;
    Some(LocalColumn {
        name: m.local.clone(),
        ty: attr.ty,
        cast: m.cast,
        default: m.default.as_ref().map(|d| d.coerce_to(attr.ty).unwrap_or_else(|| d.clone())),
    })
}

fn localize(p: &Predicate, f: &Fragment, class: &[AttributeDef]) -> LocalPredicate {
    let col = |a: &Ident| {
        let def = class.iter().find(|d| d.name == *a).expect("validated attribute");
        column(f, def).expect("pushed attribute is mapped")
    };
    LocalPredicate {
        disjuncts: p
            .disjuncts
            .iter()
            .map(|d| {
                d.comparisons
                    .iter()
                    .map(|c| LocalComparison {
                        column: col(&c.attr),
                        op: c.op,
                        rhs: match &c.rhs {
                            Operand::Literal(v) => LocalOperand::Value(v.clone()),
                            Operand::Attr(a) => LocalOperand::Column(col(a)),
                        },
                    })
                    .collect()
            })
            .collect(),
    }
}

fn guards(f: &Fragment, class: &[AttributeDef], columns: &[LocalColumn]) -> Vec<LocalColumn> {
    class
        .iter()
        .filter_map(|a| column(f, a))
        .filter(|c| !columns.iter().any(|p| p.name == c.name))
        .collect()
}

fn mapping_for<'a>(snapshot: &'a Catalog, class: &Ident) -> Result<&'a MappingRule, DecomposeError> {
    let rule = snapshot.mapping(class.as_str()).ok_or_else(|| DecomposeError::MissingMapping(class.to_string()))?;
    if rule.stale {
        return Err(DecomposeError::StaleMapping(class.to_string()));
    }
    Ok(rule)
}

fn push_unique(out: &mut Vec<Comparison>, c: &Comparison) {
    if !out.contains(c) {
        out.push(c.clone());
    }
}

/// Builds the read plan for a validated SELECT.
pub fn decompose_select(stmt: &TypedStatement, snapshot: &Catalog) -> Result<DecompositionPlan, DecomposeError> {
    let sel = stmt.as_select().ok_or(DecomposeError::WrongStatement("SELECT"))?;
    let rule = mapping_for(snapshot, &sel.class.name)?;
    let attrs = &sel.class.attributes;

    // Attributes the composer needs, in class declaration order.
    let needed: Vec<&AttributeDef> = attrs
        .iter()
        .filter(|a| {
            sel.projection.iter().any(|p| p.name == a.name)
                || sel.predicate.as_ref().is_some_and(|p| p.attrs().any(|x| *x == a.name))
                || sel.order_by.as_ref().is_some_and(|o| o.attr == a.name)
        })
        .collect();

    let (subqueries, scans, residual) = match rule.kind {
        MappingKind::Horizontal => plan_horizontal(sel, rule, &needed),
        MappingKind::Vertical => plan_vertical(sel, rule, &needed),
    };

    let needed_names: Vec<Ident> = needed.iter().map(|a| a.name.clone()).collect();
    let mut tree = match rule.kind {
        MappingKind::Horizontal => CompositionNode::UnionAll { columns: needed_names, inputs: scans },
        MappingKind::Vertical => CompositionNode::JoinOn {
            key: rule.join_key.clone().expect("vertical mapping has a join key"),
            inputs: scans,
        },
    };
    if let Some(predicate) = residual {
        tree = CompositionNode::Filter { predicate, input: Box::new(tree) };
    }
    if let Some(o) = &sel.order_by {
        tree = CompositionNode::Sort { attr: o.attr.clone(), dir: o.dir, input: Box::new(tree) };
    }
    if let Some(n) = sel.limit {
        tree = CompositionNode::Limit { n, input: Box::new(tree) };
    }
    tree = CompositionNode::Project {
        attrs: sel.projection.iter().map(|a| a.name.clone()).collect(),
        input: Box::new(tree),
    };

    Ok(DecompositionPlan {
        statement: stmt.source_text(),
        catalog_version: snapshot.version,
        class: sel.class.name.clone(),
        kind: rule.kind,
        subqueries,
        composition: tree,
        output: sel.projection.clone(),
    })
}

type Planned = (Vec<SubQuery>, Vec<CompositionNode>, Option<Predicate>);

fn plan_horizontal(sel: &TypedSelect, rule: &MappingRule, needed: &[&AttributeDef]) -> Planned {
    let attrs = &sel.class.attributes;
    let mut subqueries = Vec::new();
    let mut scans = Vec::new();
    let mut residual: Vec<Comparison> = Vec::new();
    let mut residual_whole = false;
    let is_conj = sel.predicate.as_ref().is_some_and(|p| p.as_conjunction().is_some());

    for f in &rule.fragments {
        let (pushed, rest) = match &sel.predicate {
            Some(p) => split_predicate(p, f),
            None => (None, None),
        };
        if let Some(rest) = rest {
            match rest.as_conjunction() {
                Some(cs) if is_conj => cs.iter().for_each(|c| push_unique(&mut residual, c)),
                _ => residual_whole = true,
            }
        }
        let (names, columns): (Vec<Ident>, Vec<LocalColumn>) =
            needed.iter().filter_map(|a| column(f, a).map(|c| (a.name.clone(), c))).unzip();
        let guards = guards(f, attrs, &columns);
        scans.push(CompositionNode::Scan { subquery: subqueries.len(), site: f.site.clone(), columns: names });
        subqueries.push(SubQuery {
            site: f.site.clone(),
            local_class: f.local_class.clone(),
            columns,
            predicate: pushed.map(|p| localize(&p, f, attrs)),
            guards,
            purpose: Purpose::Data,
        });
    }

    let residual = if residual_whole { sel.predicate.clone() } else { ordered_conjunction(sel, residual) };
    (subqueries, scans, residual)
}

/// Keeps the residual conjuncts in the order they were written.
fn ordered_conjunction(sel: &TypedSelect, picked: Vec<Comparison>) -> Option<Predicate> {
    let all = sel.predicate.as_ref().and_then(|p| p.as_conjunction()).unwrap_or(&[]);
    Predicate::conjunction(all.iter().filter(|c| picked.contains(c)).cloned().collect())
}

fn plan_vertical(sel: &TypedSelect, rule: &MappingRule, needed: &[&AttributeDef]) -> Planned {
    let attrs = &sel.class.attributes;
    let key = rule.join_key.clone().expect("vertical mapping has a join key");
    let key_def = sel.class.attribute(key.as_str()).expect("join key is a class attribute");
    let owner = owners(rule, attrs);
    let owner_of = |a: &Ident| attrs.iter().position(|d| d.name == *a).and_then(|i| owner[i]);

    let mut subqueries = Vec::new();
    let mut scans = Vec::new();
    let mut pushed_somewhere: Vec<Comparison> = Vec::new();
    let mut whole_pushed = false;
    let is_conj = sel.predicate.as_ref().is_some_and(|p| p.as_conjunction().is_some());

    for (fi, f) in rule.fragments.iter().enumerate() {
        // A fragment may evaluate a comparison when every attribute in it is
        // either the join key or sourced from that fragment.
        let sourced = |a: &Ident| *a == key || owner_of(a) == Some(fi);
        let pushed = sel.predicate.as_ref().and_then(|p| split_with(p, &sourced).0);
        if let Some(p) = &pushed {
            match p.as_conjunction() {
                Some(cs) if is_conj => cs.iter().for_each(|c| push_unique(&mut pushed_somewhere, c)),
                _ => whole_pushed = true,
            }
        }

        let owned: Vec<&AttributeDef> = needed.iter().copied().filter(|a| a.name != key && owner_of(&a.name) == Some(fi)).collect();
        let purpose = if owned.is_empty() && !(fi == 0 && needed.iter().any(|a| a.name == key)) {
            Purpose::KeySide
        } else {
            Purpose::Data
        };
        let mut out: Vec<&AttributeDef> = vec![key_def];
        out.extend(owned);
        out.sort_by_key(|a| attrs.iter().position(|d| d.name == a.name));
        let (names, columns): (Vec<Ident>, Vec<LocalColumn>) =
            out.iter().map(|a| (a.name.clone(), column(f, a).expect("owned attribute is mapped"))).unzip();
        let guards = guards(f, attrs, &columns);
        scans.push(CompositionNode::Scan { subquery: subqueries.len(), site: f.site.clone(), columns: names });
        subqueries.push(SubQuery {
            site: f.site.clone(),
            local_class: f.local_class.clone(),
            columns,
            predicate: pushed.map(|p| localize(&p, f, attrs)),
            guards,
            purpose,
        });
    }

    let residual = match sel.predicate.as_ref().map(|p| (p, p.as_conjunction())) {
        None => None,
        Some((_, Some(cs))) => {
            Predicate::conjunction(cs.iter().filter(|c| !pushed_somewhere.contains(c)).cloned().collect())
        }
        Some((p, None)) => (!whole_pushed).then(|| p.clone()),
    };
    (subqueries, scans, residual)
}

/// Builds the write plan for a validated INSERT, UPDATE or DELETE.
pub fn decompose_write(stmt: &TypedStatement, snapshot: &Catalog) -> Result<WritePlan, DecomposeError> {
    let w = stmt.as_write().ok_or(DecomposeError::WrongStatement("write"))?;
    let rule = mapping_for(snapshot, &w.class.name)?;
    let subwrites = match &w.op {
        WriteOp::Insert { values } => insert_plan(w, rule, snapshot, values)?,
        WriteOp::Update { assignments, predicate } => update_plan(w, rule, assignments, predicate.as_ref())?,
        WriteOp::Delete { predicate } => delete_plan(w, rule, predicate.as_ref())?,
    };
    Ok(WritePlan {
        statement: stmt.source_text(),
        catalog_version: snapshot.version,
        class: w.class.name.clone(),
        kind: rule.kind,
        subwrites,
    })
}

fn to_local(f: &Fragment, attr: &AttributeDef, v: &Value) -> Result<(Ident, Value), DecomposeError> {
    let m = f.map_for_global(attr.name.as_str()).ok_or_else(|| DecomposeError::UnmappedWriteAttribute {
        site: f.site.to_string(),
        attr: attr.name.to_string(),
    })?;
    let local = match m.cast {
        Some(c) => c.invert(v),
        None => Some(v.clone()),
    }
    .ok_or_else(|| DecomposeError::InverseCast {
        site: f.site.to_string(),
        attr: attr.name.to_string(),
        value: v.to_literal(),
    })?;
    Ok((m.local.clone(), local))
}

fn insert_plan(
    w: &TypedWrite,
    rule: &MappingRule,
    snapshot: &Catalog,
    values: &[(AttributeDef, Value)],
) -> Result<Vec<SubWrite>, DecomposeError> {
    let row = |a: &AttributeDef| values.iter().find(|(d, _)| d.name == a.name).map(|(_, v)| v.clone()).unwrap_or(Value::Null);
    let targets: Vec<&Fragment> = match rule.kind {
        MappingKind::Vertical => rule.fragments.iter().collect(),
        MappingKind::Horizontal if rule.fragments.len() == 1 => rule.fragments.iter().collect(),
        MappingKind::Horizontal => {
            let matched: Vec<&Fragment> = rule
                .fragments
                .iter()
                .filter(|f| {
                    f.route_when.as_ref().is_some_and(|p| {
                        p.eval(&|a: &Ident| values.iter().find(|(d, _)| d.name == *a).map(|(_, v)| v))
                    })
                })
                .collect();
            match matched.len() {
                0 => return Err(DecomposeError::NoRoute(w.class.name.to_string())),
                1 => matched,
                _ => {
                    return Err(DecomposeError::AmbiguousRoute {
                        class: w.class.name.to_string(),
                        sites: matched.iter().map(|f| f.site.to_string()).collect(),
                    })
                }
            }
        }
    };

    let mut out = Vec::new();
    for f in targets {
        // Listed non-NULL values must land somewhere in this fragment.
        if rule.kind == MappingKind::Horizontal {
            if let Some((a, _)) = values.iter().find(|(a, v)| !v.is_null() && !f.maps_global(a.name.as_str())) {
                return Err(DecomposeError::UnmappedWriteAttribute { site: f.site.to_string(), attr: a.name.to_string() });
            }
        }
        let local_class = snapshot.local_class(f.site.as_str(), f.local_class.as_str());
        let mut cols = Vec::new();
        for a in &w.class.attributes {
            let Some(m) = f.map_for_global(a.name.as_str()) else { continue };
            if local_class.is_some_and(|lc| lc.attribute(m.local.as_str()).is_none()) {
                continue;
            }
            cols.push(to_local(f, a, &row(a))?);
        }
        if let Some(lc) = local_class {
            for la in lc.attributes.iter().filter(|la| !la.nullable) {
                if !cols.iter().any(|(n, v)| *n == la.name && !v.is_null()) {
                    return Err(DecomposeError::MissingLocalValue {
                        site: f.site.to_string(),
                        column: la.name.to_string(),
                    });
                }
            }
        }
        out.push(SubWrite {
            site: f.site.clone(),
            local_class: f.local_class.clone(),
            kind: WriteKind::Insert,
            values: cols,
            predicate: None,
        });
    }
    Ok(out)
}

fn write_predicate(
    f: &Fragment,
    fi: usize,
    rule: &MappingRule,
    class: &[AttributeDef],
    p: Option<&Predicate>,
) -> Result<Option<LocalPredicate>, DecomposeError> {
    let Some(p) = p else { return Ok(None) };
    let (pushed, residual) = match rule.kind {
        MappingKind::Horizontal => split_predicate(p, f),
        MappingKind::Vertical => {
            let owner = owners(rule, class);
            let key = rule.join_key.clone();
            split_with(p, &|a: &Ident| {
                Some(a) == key.as_ref() || class.iter().position(|d| d.name == *a).and_then(|i| owner[i]) == Some(fi)
            })
        }
    };
    if let Some(r) = residual {
        return Err(DecomposeError::UnsupportedResidualWrite { site: f.site.to_string(), residual: r.to_string() });
    }
    Ok(pushed.map(|p| localize(&p, f, class)))
}

fn update_plan(
    w: &TypedWrite,
    rule: &MappingRule,
    assignments: &[(AttributeDef, Value)],
    predicate: Option<&Predicate>,
) -> Result<Vec<SubWrite>, DecomposeError> {
    let attrs = &w.class.attributes;
    let mut out = Vec::new();
    for (fi, f) in rule.fragments.iter().enumerate() {
        let relevant: Vec<&(AttributeDef, Value)> = match rule.kind {
            MappingKind::Horizontal => assignments.iter().collect(),
            MappingKind::Vertical => assignments.iter().filter(|(a, _)| f.maps_global(a.name.as_str())).collect(),
        };
        if relevant.is_empty() {
            continue;
        }
        let values = relevant.iter().map(|(a, v)| to_local(f, a, v)).collect::<Result<Vec<_>, _>>()?;
        let predicate = write_predicate(f, fi, rule, attrs, predicate)?;
        out.push(SubWrite { site: f.site.clone(), local_class: f.local_class.clone(), kind: WriteKind::Update, values, predicate });
    }
    Ok(out)
}

fn delete_plan(w: &TypedWrite, rule: &MappingRule, predicate: Option<&Predicate>) -> Result<Vec<SubWrite>, DecomposeError> {
    rule.fragments
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            Ok(SubWrite {
                site: f.site.clone(),
                local_class: f.local_class.clone(),
                kind: WriteKind::Delete,
                values: Vec::new(),
                predicate: write_predicate(f, fi, rule, &w.class.attributes, predicate)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
