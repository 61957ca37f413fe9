use crate::catalog::{AttributeDef, Catalog, VirtualClass};
use crate::value::{Ident, Value};

use super::ast::*;
use super::{parse_statement, GqlError};

/// A statement bound to catalog symbols: names resolved to their declared
/// spelling, literals coerced to attribute types and views inlined.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedStatement {
    pub source: Statement,
    pub body: TypedBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypedBody {
    Select(TypedSelect),
    Write(TypedWrite),
}

impl TypedStatement {
    pub fn source_text(&self) -> String {
        self.source.to_string()
    }

    pub fn as_select(&self) -> Option<&TypedSelect> {
        match &self.body {
            TypedBody::Select(s) => Some(s),
            TypedBody::Write(_) => None,
        }
    }

    pub fn as_write(&self) -> Option<&TypedWrite> {
        match &self.body {
            TypedBody::Write(w) => Some(w),
            TypedBody::Select(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedSelect {
    pub class: VirtualClass,
    /// Output attributes; `*` expanded in declaration order.
    pub projection: Vec<AttributeDef>,
    pub predicate: Option<Predicate>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedWrite {
    pub class: VirtualClass,
    pub op: WriteOp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WriteOp {
    /// Listed attributes with coerced values; unlisted attributes are NULL.
    Insert { values: Vec<(AttributeDef, Value)> },
    Update { assignments: Vec<(AttributeDef, Value)>, predicate: Option<Predicate> },
    Delete { predicate: Option<Predicate> },
}

pub fn validate(stmt: &Statement, snapshot: &Catalog) -> Result<TypedStatement, GqlError> {
    let body = match stmt {
        Statement::Select(s) => TypedBody::Select(bind_select(s, snapshot, true)?),
        write => TypedBody::Write(bind_write(write, snapshot)?),
    };
    Ok(TypedStatement { source: stmt.clone(), body })
}

/// Checks a stored view body. Staleness is ignored so that marking a mapping
/// stale does not invalidate the catalog itself.
pub fn check_view_query(text: &str, snapshot: &Catalog) -> Result<(), GqlError> {
    match parse_statement(text)? {
        Statement::Select(s) => {
            if snapshot.class(s.from.as_str()).is_none() {
                return Err(GqlError::UnknownClass(s.from.to_string()));
            }
            bind_select(&s, snapshot, false).map(|_| ())
        }
        _ => Err(GqlError::InvalidStatement("a view must be a SELECT".into())),
    }
}

/// Type-checks one comparison against a class; used for routing predicates.
pub fn check_comparison(class: &VirtualClass, cmp: &Comparison) -> Result<(), String> {
    bind_comparison(class, cmp).map(|_| ()).map_err(|e| e.to_string())
}

fn resolve_class<'a>(snapshot: &'a Catalog, name: &Ident, check_stale: bool) -> Result<&'a VirtualClass, GqlError> {
    let class = snapshot.class(name.as_str()).ok_or_else(|| GqlError::UnknownClass(name.to_string()))?;
    if check_stale && snapshot.mapping(name.as_str()).is_some_and(|m| m.stale) {
        return Err(GqlError::StaleMapping(class.name.to_string()));
    }
    Ok(class)
}

fn resolve_attr<'a>(class: &'a VirtualClass, name: &Ident) -> Result<&'a AttributeDef, GqlError> {
    class.attribute(name.as_str()).ok_or_else(|| GqlError::UnknownAttribute {
        class: class.name.to_string(),
        attr: name.to_string(),
    })
}

fn bind_select(s: &Select, snapshot: &Catalog, check_stale: bool) -> Result<TypedSelect, GqlError> {
    if snapshot.class(s.from.as_str()).is_none() {
        if let Some(view) = snapshot.view(s.from.as_str()) {
            return bind_view_select(s, &view.query, snapshot, check_stale);
        }
    }
    let class = resolve_class(snapshot, &s.from, check_stale)?;
    let projection = match &s.projection {
        Projection::Star => class.attributes.clone(),
        Projection::Columns(cols) => {
            cols.iter().map(|c| resolve_attr(class, c).cloned()).collect::<Result<Vec<_>, _>>()?
        }
    };
    let predicate = s.predicate.as_ref().map(|p| bind_predicate(class, p)).transpose()?;
    let order_by = s
        .order_by
        .as_ref()
        .map(|o| resolve_attr(class, &o.attr).map(|a| OrderBy { attr: a.name.clone(), dir: o.dir }))
        .transpose()?;
    Ok(TypedSelect { class: class.clone(), projection, predicate, order_by, limit: s.limit })
}

fn bind_view_select(
    outer: &Select,
    body: &str,
    snapshot: &Catalog,
    check_stale: bool,
) -> Result<TypedSelect, GqlError> {
    let Statement::Select(inner) = parse_statement(body)? else {
        return Err(GqlError::InvalidStatement(format!("view {} is not a SELECT", outer.from)));
    };
    if snapshot.class(inner.from.as_str()).is_none() {
        return Err(GqlError::UnknownClass(inner.from.to_string()));
    }
    let inner = bind_select(&inner, snapshot, check_stale)?;
    let visible = VirtualClass { name: outer.from.clone(), attributes: inner.projection.clone() };
    let projection = match &outer.projection {
        Projection::Star => inner.projection.clone(),
        Projection::Columns(cols) => {
            cols.iter().map(|c| resolve_attr(&visible, c).cloned()).collect::<Result<Vec<_>, _>>()?
        }
    };
    let outer_pred = outer.predicate.as_ref().map(|p| bind_predicate(&visible, p)).transpose()?;
    let outer_order = outer
        .order_by
        .as_ref()
        .map(|o| resolve_attr(&visible, &o.attr).map(|a| OrderBy { attr: a.name.clone(), dir: o.dir }))
        .transpose()?;
    if inner.limit.is_some() {
        let reorders = outer_order.is_some() && outer_order != inner.order_by;
        if outer_pred.is_some() || reorders {
            return Err(GqlError::InvalidStatement(format!(
                "view {} has a LIMIT; it cannot be filtered or re-ordered",
                outer.from
            )));
        }
    }
    let limit = match (inner.limit, outer.limit) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Ok(TypedSelect {
        class: inner.class,
        projection,
        predicate: Predicate::and_opt(inner.predicate.as_ref(), outer_pred.as_ref()),
        order_by: outer_order.or(inner.order_by),
        limit,
    })
}

fn bind_predicate(class: &VirtualClass, p: &Predicate) -> Result<Predicate, GqlError> {
    let disjuncts = p
        .disjuncts
        .iter()
        .map(|d| {
            let comparisons =
                d.comparisons.iter().map(|c| bind_comparison(class, c)).collect::<Result<Vec<_>, _>>()?;
            Ok(Conjunction { comparisons })
        })
        .collect::<Result<Vec<_>, GqlError>>()?;
    Ok(Predicate { disjuncts })
}

fn bind_comparison(class: &VirtualClass, c: &Comparison) -> Result<Comparison, GqlError> {
    let left = resolve_attr(class, &c.attr)?;
    let rhs = match &c.rhs {
        Operand::Literal(v) => Operand::Literal(coerce_literal(left, v)?),
        Operand::Attr(a) => {
            let right = resolve_attr(class, a)?;
            if !left.ty.comparable_with(right.ty) {
                return Err(GqlError::TypeMismatch(format!(
                    "cannot compare {} ({}) with {} ({})",
                    left.name, left.ty, right.name, right.ty
                )));
            }
            Operand::Attr(right.name.clone())
        }
    };
    Ok(Comparison { attr: left.name.clone(), op: c.op, rhs })
}

fn coerce_literal(attr: &AttributeDef, v: &Value) -> Result<Value, GqlError> {
    v.coerce_to(attr.ty).ok_or_else(|| {
        GqlError::TypeMismatch(format!(
            "{} literal {} is not compatible with {} ({})",
            v.type_of().map(|t| t.name()).unwrap_or("NULL"),
            v.to_literal(),
            attr.name,
            attr.ty
        ))
    })
}

fn bind_write(stmt: &Statement, snapshot: &Catalog) -> Result<TypedWrite, GqlError> {
    let target = stmt.target();
    if snapshot.class(target.as_str()).is_none() && snapshot.view(target.as_str()).is_some() {
        return Err(GqlError::ViewNotSelectable(target.to_string()));
    }
    let class = resolve_class(snapshot, target, true)?;
    let op = match stmt {
        Statement::Insert(ins) => {
            if ins.columns.len() != ins.values.len() {
                return Err(GqlError::InvalidStatement(format!(
                    "{} columns but {} values",
                    ins.columns.len(),
                    ins.values.len()
                )));
            }
            let mut values: Vec<(AttributeDef, Value)> = Vec::with_capacity(ins.columns.len());
            for (col, v) in ins.columns.iter().zip(&ins.values) {
                let attr = resolve_attr(class, col)?;
                if values.iter().any(|(a, _)| a.name == attr.name) {
                    return Err(GqlError::InvalidStatement(format!("{} listed twice", attr.name)));
                }
                values.push((attr.clone(), coerce_literal(attr, v)?));
            }
            for attr in class.attributes.iter().filter(|a| !a.nullable) {
                let given = values.iter().find(|(a, _)| a.name == attr.name);
                if given.is_none_or(|(_, v)| v.is_null()) {
                    return Err(GqlError::TypeMismatch(format!("{} is not nullable", attr.name)));
                }
            }
            WriteOp::Insert { values }
        }
        Statement::Update(up) => {
            let mut assignments: Vec<(AttributeDef, Value)> = Vec::with_capacity(up.assignments.len());
            for (col, v) in &up.assignments {
                let attr = resolve_attr(class, col)?;
                if assignments.iter().any(|(a, _)| a.name == attr.name) {
                    return Err(GqlError::InvalidStatement(format!("{} assigned twice", attr.name)));
                }
                let v = coerce_literal(attr, v)?;
                if v.is_null() && !attr.nullable {
                    return Err(GqlError::TypeMismatch(format!("{} is not nullable", attr.name)));
                }
                assignments.push((attr.clone(), v));
            }
            let predicate = up.predicate.as_ref().map(|p| bind_predicate(class, p)).transpose()?;
            WriteOp::Update { assignments, predicate }
        }
        Statement::Delete(del) => {
            let predicate = del.predicate.as_ref().map(|p| bind_predicate(class, p)).transpose()?;
            WriteOp::Delete { predicate }
        }
        Statement::Select(_) => unreachable!("selects are bound separately"),
    };
    Ok(TypedWrite { class: class.clone(), op })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_catalog;
    use crate::testing::ACME_CATALOG;
    use crate::value::CanonicalType;

    fn acme() -> Catalog {
        load_catalog(ACME_CATALOG).unwrap()
    }

    fn check(text: &str) -> Result<TypedStatement, GqlError> {
        validate(&parse_statement(text).unwrap(), &acme())
    }

    #[test]
    fn int_literal_widens_to_float() {
        let ts = check("SELECT name FROM employee WHERE salary > 50000").unwrap();
        let sel = ts.as_select().unwrap();
        assert_eq!(sel.class.name.as_str(), "Employee");
        let cmp = sel.predicate.as_ref().unwrap().comparisons().next().unwrap();
        assert_eq!(cmp.rhs, Operand::Literal(Value::Float(50000.0)));
        assert_eq!(sel.projection[0].ty, CanonicalType::String);
    }

    #[test]
    fn unknown_attribute() {
        assert_eq!(
            check("SELECT nam FROM Employee"),
            Err(GqlError::UnknownAttribute { class: "Employee".into(), attr: "nam".into() })
        );
    }

    #[test]
    fn string_into_float_is_a_type_mismatch() {
        let err = check("UPDATE Employee SET salary = 'high'").unwrap_err();
        assert_eq!(err.kind(), "TYPE_MISMATCH");
        assert_eq!(check("SELECT * FROM Employee WHERE emp_id = 1.5").unwrap_err().kind(), "TYPE_MISMATCH");
        assert_eq!(check("SELECT * FROM Employee WHERE name = salary").unwrap_err().kind(), "TYPE_MISMATCH");
    }

    #[test]
    fn star_expands_in_declaration_order() {
        let ts = check("SELECT * FROM Employee").unwrap();
        let names: Vec<_> = ts.as_select().unwrap().projection.iter().map(|a| a.name.to_string()).collect();
        assert_eq!(names, ["emp_id", "name", "salary", "dept"]);
    }

    #[test]
    fn stale_mapping_rejected() {
        let mut c = acme();
        c.mappings[0].stale = true;
        let stmt = parse_statement("SELECT * FROM Employee").unwrap();
        assert_eq!(validate(&stmt, &c), Err(GqlError::StaleMapping("Employee".into())));
    }

    #[test]
    fn views_are_inlined_and_read_only() {
        let ts = check("SELECT name FROM rnd WHERE salary > 1000").unwrap();
        let sel = ts.as_select().unwrap();
        assert_eq!(sel.class.name.as_str(), "Employee");
        assert_eq!(sel.predicate.as_ref().unwrap().comparisons().count(), 2);
        assert_eq!(check("DELETE FROM RnD").unwrap_err().kind(), "VIEW_NOT_SELECTABLE");
        assert_eq!(check("SELECT dept FROM RnD").unwrap_err().kind(), "UNKNOWN_ATTRIBUTE");
    }

    #[test]
    fn inserts_check_required_attributes() {
        assert!(check("INSERT INTO Customer (cust_id, name, credit_limit) VALUES (7, 'Ada', 1000)").is_ok());
        assert_eq!(check("INSERT INTO Customer (name) VALUES ('Ada')").unwrap_err().kind(), "TYPE_MISMATCH");
        assert_eq!(check("INSERT INTO Customer (cust_id) VALUES (1, 2)").unwrap_err().kind(), "INVALID_STATEMENT");
        assert_eq!(check("INSERT INTO Ghost (a) VALUES (1)").unwrap_err().kind(), "UNKNOWN_CLASS");
    }
}
