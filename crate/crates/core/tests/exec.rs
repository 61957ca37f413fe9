use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;

use mdbs_core::exec::*;
use mdbs_core::{Ident, Value};
use mdbs_core::catalog::{load_catalog, Catalog};
use mdbs_core::decompose::{decompose_select, decompose_write};
use mdbs_core::gql::{parse_statement, validate};
use mdbs_core::testing::{Behaviour, MemorySite, Table, ACME_CATALOG};

fn s(v: &str) -> Value {
    Value::Str(v.into())
}

fn acme_sites(branch: Behaviour, fin: Behaviour) -> SiteSet {
    let hq = MemorySite::new(vec![
        (
            "EMP",
            Table::new(
                &["ENO", "ENAME", "SAL", "DEPT"],
                vec![
                    vec![Value::Int(1), s("Alice"), Value::Float(72000.0), s("R&D")],
                    vec![Value::Int(2), s("Raj"), Value::Float(48000.0), s("R&D")],
                ],
            ),
        ),
        (
            "CUST",
            Table::new(
                &["ID", "CNAME"],
                vec![vec![Value::Int(1), s("Acme Corp")], vec![Value::Int(2), s("Globex")], vec![Value::Int(3), s("Initech")]],
            ),
        ),
    ]);
    let branch_site = MemorySite::new(vec![(
        "staff",
        Table::new(
            &["id", "full_name", "salary", "dept"],
            vec![vec![Value::Int(9), s("Bo"), s("51000.5"), s("Sales")], vec![Value::Int(10), s("Cy"), s("abc"), s("Sales")]],
        ),
    )])
    .with_behaviour(branch);
    let fin_site = MemorySite::new(vec![(
        "CREDIT",
        Table::new(&["cust_id", "limit"], vec![vec![Value::Int(1), Value::Float(5000.0)], vec![Value::Int(2), Value::Float(250.0)]]),
    )])
    .with_behaviour(fin);
    let mut sites: SiteSet = SiteSet::new();
    sites.insert("hq".into(), Arc::new(hq));
    sites.insert("branch".into(), Arc::new(branch_site));
    sites.insert("fin".into(), Arc::new(fin_site));
    sites
}

fn acme() -> Catalog {
    load_catalog(ACME_CATALOG).unwrap()
}

fn fast() -> ExecOptions {
    ExecOptions { timeout: Duration::from_millis(100), ..ExecOptions::default() }
}

async fn run(text: &str, sites: &SiteSet, opts: &ExecOptions) -> Result<QueryResult, ExecError> {
    let c = acme();
    let ts = validate(&parse_statement(text).unwrap(), &c).unwrap();
    execute_plan(&decompose_select(&ts, &c).unwrap(), sites, opts).await
}

async fn oracle(text: &str, sites: &SiteSet) -> ResultSet {
    let c = acme();
    let ts = validate(&parse_statement(text).unwrap(), &c).unwrap();
    reference_evaluate(&ts, &materialize(&c, sites, &fast()).await.unwrap())
}

#[tokio::test]
async fn materialized_extensions() {
    let c = acme();
    let db = materialize(&c, &acme_sites(Behaviour::Answer, Behaviour::Answer), &fast()).await.unwrap();
    let emp = db.extension("Employee").unwrap();
    assert_eq!(emp.rows.len(), 3);
    assert!(emp.rows.contains(&vec![Value::Int(9), s("Bo"), Value::Float(51000.5), s("Sales")]));
    let cust = db.extension("Customer").unwrap();
    assert_eq!(cust.rows, vec![
        vec![Value::Int(1), s("Acme Corp"), Value::Float(5000.0)],
        vec![Value::Int(2), s("Globex"), Value::Float(250.0)],
    ]);
}

#[tokio::test]
async fn reference_scan_examples() {
    let sites = acme_sites(Behaviour::Answer, Behaviour::Answer);
    assert_eq!(oracle("SELECT * FROM Employee", &sites).await.rows.len(), 3);
    assert!(oracle("SELECT * FROM Employee WHERE salary > 1000000000", &sites).await.rows.is_empty());
}

#[tokio::test]
async fn federated_matches_oracle_on_acme() {
    let sites = acme_sites(Behaviour::Answer, Behaviour::Answer);
    for q in [
        "SELECT * FROM Employee",
        "SELECT name FROM Employee WHERE salary > 50000",
        "SELECT name, salary FROM Employee ORDER BY salary DESC LIMIT 2",
        "SELECT * FROM Customer",
        "SELECT cust_id FROM Customer",
        "SELECT name FROM Customer WHERE credit_limit > 500 OR name = 'Globex'",
        "SELECT name, credit_limit FROM Customer WHERE credit_limit > 500",
    ] {
        let got = run(q, &sites, &fast()).await.unwrap();
        let want = oracle(q, &sites).await;
        assert!(got.result.same_multiset(&want), "{q}: {:?} vs {:?}", got.result, want);
        assert!(!got.partial);
    }
}

#[tokio::test]
async fn cast_failures_are_counted() {
    let sites = acme_sites(Behaviour::Answer, Behaviour::Answer);
    let r = run("SELECT * FROM Employee", &sites, &fast()).await.unwrap();
    let branch = r.statuses.iter().find(|s| s.site == "branch").unwrap();
    assert_eq!(branch.skipped_casts, 1);
    assert_eq!(branch.count, 1);
}

#[tokio::test]
async fn empty_union() {
    let sites = acme_sites(Behaviour::Answer, Behaviour::Answer);
    let r = run("SELECT * FROM Employee WHERE emp_id > 100", &sites, &fast()).await.unwrap();
    assert!(r.result.rows.is_empty());
    assert_eq!(r.statuses.len(), 2);
    assert!(r.statuses.iter().all(|s| s.outcome == Outcome::Ok));
}

#[tokio::test]
async fn silent_site_fails_fast_as_timeout() {
    let sites = acme_sites(Behaviour::Silent, Behaviour::Answer);
    let err = run("SELECT * FROM Employee", &sites, &fast()).await.unwrap_err();
    assert_eq!(err.kind(), "SITE_UNAVAILABLE");
    let branch = err.statuses().iter().find(|s| s.site == "branch").unwrap();
    assert_eq!(branch.outcome, Outcome::Timeout);
    assert_eq!(err.statuses().len(), 2);
}

#[tokio::test]
async fn partial_union_keeps_surviving_rows() {
    let sites = acme_sites(Behaviour::Silent, Behaviour::Answer);
    let opts = ExecOptions { failure_mode: FailureMode::Partial, ..fast() };
    let r = run("SELECT * FROM Employee", &sites, &opts).await.unwrap();
    assert!(r.partial);
    assert_eq!(r.result.rows.len(), 2);
}

#[tokio::test]
async fn partial_join_is_refused() {
    let sites = acme_sites(Behaviour::Answer, Behaviour::Deny);
    let opts = ExecOptions { failure_mode: FailureMode::Partial, ..fast() };
    let err = run("SELECT * FROM Customer", &sites, &opts).await.unwrap_err();
    assert_eq!(err.kind(), "PARTIAL_UNSUPPORTED");
    let err = run("SELECT * FROM Customer", &sites, &fast()).await.unwrap_err();
    assert_eq!(err.kind(), "SITE_UNAVAILABLE");
}

#[tokio::test]
async fn schema_drift_is_detected() {
    let c = acme();
    let ts = validate(&parse_statement("SELECT * FROM Customer").unwrap(), &c).unwrap();
    let plan = decompose_select(&ts, &c).unwrap();
    let bad = vec![Some(vec![vec![Value::Int(1)]]), Some(vec![])];
    assert!(matches!(compose(&plan, &bad), Err(ComposeError::SchemaDrift { .. })));
}

#[tokio::test]
async fn join_examples() {
    let c = acme();
    let ts = validate(&parse_statement("SELECT * FROM Customer").unwrap(), &c).unwrap();
    let plan = decompose_select(&ts, &c).unwrap();
    let hit = compose(&plan, &[Some(vec![vec![Value::Int(7), s("Ada")]]), Some(vec![vec![Value::Int(7), Value::Float(1000.0)]])]).unwrap();
    assert_eq!(hit.rows, vec![vec![Value::Int(7), s("Ada"), Value::Float(1000.0)]]);
    let miss = compose(&plan, &[Some(vec![vec![Value::Int(7), s("Ada")]]), Some(vec![vec![Value::Int(8), Value::Float(1.0)]])]).unwrap();
    assert!(miss.rows.is_empty());
}

#[tokio::test]
async fn sort_is_stable_with_nulls_first() {
    let sites = acme_sites(Behaviour::Answer, Behaviour::Answer);
    {
        let c = acme();
        let ts = validate(&parse_statement("INSERT INTO Employee (emp_id, dept) VALUES (5, 'R&D')").unwrap(), &c).unwrap();
        let st = execute_write(&decompose_write(&ts, &c).unwrap(), &sites, &fast()).await;
        assert_eq!(st[0].outcome, Outcome::Ok);
    }
    let asc = run("SELECT emp_id FROM Employee ORDER BY salary", &sites, &fast()).await.unwrap();
    assert_eq!(asc.result.rows[0], vec![Value::Int(5)]);
    let desc = run("SELECT emp_id FROM Employee ORDER BY salary DESC", &sites, &fast()).await.unwrap();
    assert_eq!(desc.result.rows.last().unwrap(), &vec![Value::Int(5)]);
}

#[tokio::test]
async fn vertical_insert_then_read_back() {
    let c = acme();
    let sites = acme_sites(Behaviour::Answer, Behaviour::Answer);
    let ts = validate(&parse_statement("INSERT INTO Customer (cust_id, name, credit_limit) VALUES (7, 'Ada', 1000.0)").unwrap(), &c).unwrap();
    let st = execute_write(&decompose_write(&ts, &c).unwrap(), &sites, &fast()).await;
    assert_eq!(st.iter().map(|s| (s.outcome, s.count)).collect::<Vec<_>>(), vec![(Outcome::Ok, 1), (Outcome::Ok, 1)]);
    let rows = oracle("SELECT * FROM Customer WHERE cust_id = 7", &sites).await.rows;
    assert_eq!(rows, vec![vec![Value::Int(7), s("Ada"), Value::Float(1000.0)]]);
}

#[tokio::test]
async fn mixed_write_outcome_is_reported_without_rollback() {
    let c = acme();
    let sites = acme_sites(Behaviour::Answer, Behaviour::Deny);
    let ts = validate(&parse_statement("INSERT INTO Customer (cust_id, name, credit_limit) VALUES (7, 'Ada', 1000.0)").unwrap(), &c).unwrap();
    let st = execute_write(&decompose_write(&ts, &c).unwrap(), &sites, &fast()).await;
    assert_eq!(st.iter().map(|s| s.outcome).collect::<Vec<_>>(), vec![Outcome::Ok, Outcome::Denied]);
    let r = sites[&Ident::from("hq")].run_subquery(&decompose_select(
        &validate(&parse_statement("SELECT cust_id, name FROM Customer").unwrap(), &c).unwrap(),
        &c,
    ).unwrap().subqueries[0]).await.unwrap();
    assert_eq!(r.rows.len(), 4);
}

#[tokio::test]
async fn update_matching_nothing() {
    let c = acme();
    let sites = acme_sites(Behaviour::Answer, Behaviour::Answer);
    let ts = validate(&parse_statement("UPDATE Employee SET name = 'x' WHERE emp_id = 999").unwrap(), &c).unwrap();
    let st = execute_write(&decompose_write(&ts, &c).unwrap(), &sites, &fast()).await;
    assert!(st.iter().all(|s| s.outcome == Outcome::Ok && s.count == 0));
}

fn value_for(kind: u8, n: i64) -> Value {
    match kind % 4 {
        0 => Value::Null,
        _ => Value::Int(n),
    }
}

fn random_sites(emp: &[(i64, u8, i64, u8)], cust: &[(i64, u8)], credit: &[(i64, u8, i64)]) -> SiteSet {
    let depts = ["R&D", "Sales", "Ops"];
    let hq = MemorySite::new(vec![
        (
            "EMP",
            Table::new(
                &["ENO", "ENAME", "SAL", "DEPT"],
                emp.iter()
                    .map(|&(id, n, sal, d)| {
                        vec![Value::Int(id), value_for(n, n as i64).to_string_value(), Value::Float(sal as f64 * 10.0), s(depts[d as usize % 3])]
                    })
                    .collect(),
            ),
        ),
        ("CUST", Table::new(&["ID", "CNAME"], cust.iter().map(|&(id, n)| vec![Value::Int(id), value_for(n, n as i64).to_string_value()]).collect())),
    ]);
    let branch = MemorySite::new(vec![(
        "staff",
        Table::new(
            &["id", "full_name", "salary", "dept"],
            emp.iter()
                .map(|&(id, n, sal, d)| vec![Value::Int(id + 1000), s(&format!("b{n}")), s(&format!("{}.5", sal)), s(depts[(d as usize + 1) % 3])])
                .collect(),
        ),
    )]);
    let fin = MemorySite::new(vec![(
        "CREDIT",
        Table::new(&["cust_id", "limit"], credit.iter().map(|&(id, k, l)| vec![Value::Int(id), if k % 5 == 0 { Value::Null } else { Value::Float(l as f64) }]).collect()),
    )]);
    let mut sites = SiteSet::new();
    sites.insert("hq".into(), Arc::new(hq));
    sites.insert("branch".into(), Arc::new(branch));
    sites.insert("fin".into(), Arc::new(fin));
    sites
}

trait ToStringValue {
    fn to_string_value(self) -> Value;
}

impl ToStringValue for Value {
    fn to_string_value(self) -> Value {
        match self {
            Value::Int(i) => Value::Str(format!("n{}", i % 5)),
            other => other,
        }
    }
}

const QUERIES: &[&str] = &[
    "SELECT * FROM Employee WHERE salary > 300.0",
    "SELECT name FROM Employee WHERE dept = 'R&D' AND salary <= 500.0",
    "SELECT emp_id, name FROM Employee WHERE name = 'n1' OR dept = 'Ops' ORDER BY emp_id DESC LIMIT 4",
    "SELECT dept FROM Employee ORDER BY name LIMIT 3",
    "SELECT * FROM Customer WHERE credit_limit >= 20.0",
    "SELECT name FROM Customer WHERE cust_id < 5 AND credit_limit > 10.0 ORDER BY credit_limit",
    "SELECT cust_id FROM Customer WHERE name = 'n2' OR credit_limit < 30.0",
    "SELECT credit_limit FROM Customer ORDER BY name DESC LIMIT 2",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn federated_equals_reference(
        emp in prop::collection::vec((0i64..50, any::<u8>(), 0i64..100, any::<u8>()), 0..20),
        cust in prop::collection::vec((0i64..10, any::<u8>()), 0..12),
        credit in prop::collection::vec((0i64..10, any::<u8>(), 0i64..60), 0..12),
    ) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_time().build().unwrap();
        rt.block_on(async {
            let sites = random_sites(&emp, &cust, &credit);
            for q in QUERIES {
                let got = run(q, &sites, &fast()).await.unwrap().result;
                let want = oracle(q, &sites).await;
                if q.contains("ORDER BY") {
                    prop_assert_eq!(&got, &want, "{}", q);
                } else {
                    prop_assert!(got.same_multiset(&want), "{}: {:?} vs {:?}", q, got, want);
                }
            }
            Ok(())
        })?;
    }
}
