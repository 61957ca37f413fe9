use super::*;
use crate::catalog::load_catalog;
use crate::gql::{parse_predicate, parse_statement, validate};
use crate::testing::ACME_CATALOG;

fn acme() -> Catalog {
    load_catalog(ACME_CATALOG).unwrap()
}

fn typed(text: &str, c: &Catalog) -> TypedStatement {
    validate(&parse_statement(text).unwrap(), c).unwrap()
}

fn plan(text: &str) -> DecompositionPlan {
    let c = acme();
    decompose_select(&typed(text, &c), &c).unwrap()
}

fn write(text: &str) -> Result<WritePlan, DecomposeError> {
    let c = acme();
    decompose_write(&typed(text, &c), &c)
}

fn names(cols: &[LocalColumn]) -> Vec<&str> {
    cols.iter().map(|c| c.name.as_str()).collect()
}

#[test]
fn split_by_mapped_attributes() {
    let c = acme();
    let hq = &c.mapping("Employee").unwrap().fragments[0];
    let p = parse_predicate("salary > 50000.0 AND dept = 'R&D'").unwrap();
    let (pushed, residual) = split_predicate(&p, hq);
    assert_eq!(pushed.unwrap().to_string(), "salary > 50000.0 AND dept = 'R&D'");
    assert!(residual.is_none());

    let fin = &c.mapping("Customer").unwrap().fragments[1];
    let p = parse_predicate("credit_limit > 1.0 AND name = 'x'").unwrap();
    let (pushed, residual) = split_predicate(&p, fin);
    assert_eq!(pushed.unwrap().to_string(), "credit_limit > 1.0");
    assert_eq!(residual.unwrap().to_string(), "name = 'x'");

    let p = parse_predicate("credit_limit > 1.0 OR name = 'x'").unwrap();
    let (pushed, residual) = split_predicate(&p, fin);
    assert!(pushed.is_none());
    assert_eq!(residual.unwrap(), p);
}

#[test]
fn horizontal_select_pushes_everything() {
    let p = plan("SELECT name FROM Employee WHERE salary > 50000");
    assert_eq!(p.subqueries.len(), 2);
    assert_eq!(p.subqueries[0].site, "hq");
    assert_eq!(names(&p.subqueries[0].columns), ["ENAME", "SAL"]);
    assert_eq!(names(&p.subqueries[1].columns), ["full_name", "salary"]);
    assert_eq!(p.subqueries[1].columns[1].cast.unwrap().to_string(), "STRING->FLOAT");
    assert!(p.subqueries.iter().all(|s| s.predicate.is_some()));
    assert!(!p.composition.has_filter());
    let CompositionNode::Project { attrs, input } = &p.composition else { panic!() };
    assert_eq!(attrs, &[Ident::from("name")]);
    assert!(matches!(**input, CompositionNode::UnionAll { .. }));
}

#[test]
fn casted_columns_guard_every_row() {
    let p = plan("SELECT emp_id FROM Employee");
    let branch = &p.subqueries[1];
    assert!(branch.guards.iter().any(|g| g.name == "salary" && g.cast.is_some()));
}

#[test]
fn vertical_select_joins_and_pushes_owned_conjuncts() {
    let p = plan("SELECT name, credit_limit FROM Customer WHERE credit_limit > 500");
    assert_eq!(p.subqueries.len(), 2);
    assert_eq!(names(&p.subqueries[0].columns), ["ID", "CNAME"]);
    assert!(p.subqueries[0].predicate.is_none());
    assert_eq!(names(&p.subqueries[1].columns), ["cust_id", "limit"]);
    assert!(p.subqueries[1].predicate.is_some());
    assert!(p.composition.has_join());
    assert!(!p.composition.has_filter());
}

#[test]
fn vertical_key_only_fragment_is_key_side() {
    let p = plan("SELECT cust_id, name FROM Customer");
    assert_eq!(p.subqueries[0].purpose, Purpose::Data);
    assert_eq!(p.subqueries[1].purpose, Purpose::KeySide);
    assert_eq!(names(&p.subqueries[1].columns), ["cust_id"]);
}

#[test]
fn vertical_key_conjunct_goes_everywhere() {
    let p = plan("SELECT name FROM Customer WHERE cust_id = 2");
    assert!(p.subqueries.iter().all(|s| s.predicate.is_some()));
    assert!(!p.composition.has_filter());
}

#[test]
fn vertical_cross_fragment_disjunction_is_residual() {
    let p = plan("SELECT name FROM Customer WHERE name = 'x' OR credit_limit > 1.0");
    assert!(p.subqueries.iter().all(|s| s.predicate.is_none()));
    assert!(p.composition.has_filter());
    assert_eq!(names(&p.subqueries[1].columns), ["cust_id", "limit"]);
}

#[test]
fn order_and_limit_wrap_the_union() {
    let p = plan("SELECT name FROM Employee ORDER BY salary DESC LIMIT 1");
    let json = serde_json::to_value(&p.composition).unwrap();
    assert_eq!(json["node"], "PROJECT");
    assert_eq!(json["input"]["node"], "LIMIT");
    assert_eq!(json["input"]["input"]["node"], "SORT");
    assert_eq!(json["input"]["input"]["input"]["node"], "UNION_ALL");
}

#[test]
fn plan_records_catalog_version() {
    let mut c = acme();
    c.version = 7;
    let p = decompose_select(&typed("SELECT * FROM Employee", &c), &c).unwrap();
    assert_eq!(p.catalog_version, 7);
}

#[test]
fn stale_mapping_is_refused() {
    let c = acme();
    let t = typed("SELECT * FROM Customer", &c);
    let mut stale = c.clone();
    stale.mappings[1].stale = true;
    assert_eq!(decompose_select(&t, &stale).unwrap_err().kind(), "STALE_MAPPING");
}

#[test]
fn insert_routes_by_predicate() {
    let w = write("INSERT INTO Employee (emp_id, name, salary, dept) VALUES (7, 'Ada', 50000.0, 'R&D')").unwrap();
    assert_eq!(w.subwrites.len(), 1);
    assert_eq!(w.subwrites[0].site, "hq");
    let w = write("INSERT INTO Employee (emp_id, name, salary, dept) VALUES (8, 'Bo', 1.5, 'Ops')").unwrap();
    assert_eq!(w.subwrites[0].site, "branch");
    let salary = w.subwrites[0].values.iter().find(|(n, _)| *n == "salary").unwrap();
    assert_eq!(salary.1, Value::Str("1.5".into()));
}

#[test]
fn insert_without_route_fails() {
    let err = write("INSERT INTO Employee (emp_id, name) VALUES (9, 'x')").unwrap_err();
    assert_eq!(err.kind(), "NO_ROUTE");
}

#[test]
fn overlapping_routes_are_ambiguous() {
    let mut c = acme();
    c.mappings[0].fragments[1].route_when = Some(parse_predicate("emp_id > 0").unwrap());
    let t = typed("INSERT INTO Employee (emp_id, dept) VALUES (1, 'R&D')", &c);
    assert_eq!(decompose_write(&t, &c).unwrap_err().kind(), "AMBIGUOUS_ROUTE");
}

#[test]
fn vertical_insert_duplicates_key() {
    let w = write("INSERT INTO Customer (cust_id, name, credit_limit) VALUES (4, 'Hooli', 10.0)").unwrap();
    assert_eq!(w.subwrites.len(), 2);
    assert_eq!(w.subwrites[0].values, vec![("ID".into(), Value::Int(4)), ("CNAME".into(), Value::Str("Hooli".into()))]);
    assert_eq!(w.subwrites[1].values, vec![("cust_id".into(), Value::Int(4)), ("limit".into(), Value::Float(10.0))]);
}

#[test]
fn vertical_update_with_foreign_predicate_is_refused() {
    let err = write("UPDATE Customer SET credit_limit = 0.0 WHERE name = 'Ada'").unwrap_err();
    assert_eq!(err.kind(), "UNSUPPORTED_RESIDUAL_WRITE");
    let w = write("UPDATE Customer SET credit_limit = 0.0 WHERE cust_id = 1").unwrap();
    assert_eq!(w.subwrites.len(), 1);
    assert_eq!(w.subwrites[0].site, "fin");
}

#[test]
fn delete_reaches_every_fragment() {
    let w = write("DELETE FROM Employee WHERE name = 'x'").unwrap();
    assert_eq!(w.subwrites.len(), 2);
    let w = write("DELETE FROM Customer WHERE cust_id = 7").unwrap();
    assert_eq!(w.subwrites.len(), 2);
    assert!(write("DELETE FROM Customer WHERE name = 'x'").is_err());
}

#[test]
fn update_of_unmapped_attribute() {
    let mut c = acme();
    c.mappings[0].fragments[1].attr_maps.retain(|m| m.global != "dept");
    let t = typed("UPDATE Employee SET dept = 'x' WHERE emp_id = 1", &c);
    assert_eq!(decompose_write(&t, &c).unwrap_err().kind(), "UNMAPPED_WRITE_ATTRIBUTE");
}

#[test]
fn explain_is_deterministic() {
    let p = plan("SELECT name FROM Employee WHERE salary > 50000 ORDER BY name");
    let render = |sq: &SubQuery| format!("{}:{}", sq.site, sq.local_class);
    let a = explain(&p, &render).to_json();
    let b = explain(&plan("SELECT name FROM Employee WHERE salary > 50000 ORDER BY name"), &render).to_json();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a["subqueries"][1]["local_text"], "branch:staff");
    assert_eq!(a["catalog_version"], 1);
}
