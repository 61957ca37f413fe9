use std::fs;
use std::path::{Path, PathBuf};

use mdbs_core::catalog::{load_catalog, AdapterKind, Catalog, LocalAttributeDef, LocalClassDef};
use mdbs_core::decompose::{
    decompose_select, DecompositionPlan, LocalColumn, LocalComparison, LocalOperand, LocalPredicate, Purpose, SubQuery,
    SubWrite, WriteKind,
};
use mdbs_core::gql::{parse_statement, validate};
use mdbs_core::testing::ACME_CATALOG;
use mdbs_core::{CanonicalType, Cast, CmpOp, Ident, Value};
use mdbs_site::{open_adapter, write_store, Adapter, AdapterError, CsvAdapter, DocumentAdapter, RelationalAdapter};
use proptest::prelude::*;
use tempfile::TempDir;

const T_INT: CanonicalType = CanonicalType::Int;
const T_STR: CanonicalType = CanonicalType::String;
const T_FLOAT: CanonicalType = CanonicalType::Float;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/acme")
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            fs::copy(e.path(), target).unwrap();
        }
    }
}

fn acme_copy() -> TempDir {
    let d = TempDir::new().unwrap();
    copy_dir(&fixtures(), d.path());
    d
}

fn acme() -> Catalog {
    load_catalog(ACME_CATALOG).unwrap()
}

fn plan(text: &str) -> DecompositionPlan {
    let c = acme();
    decompose_select(&validate(&parse_statement(text).unwrap(), &c).unwrap(), &c).unwrap()
}

fn subquery(text: &str, site: &str) -> SubQuery {
    plan(text).subqueries.into_iter().find(|s| s.site == site).unwrap()
}

fn col(name: &str, ty: CanonicalType) -> LocalColumn {
    LocalColumn { name: name.into(), ty, cast: None, default: None }
}

fn cmp(column: LocalColumn, op: CmpOp, v: Value) -> LocalComparison {
    LocalComparison { column, op, rhs: LocalOperand::Value(v) }
}

fn bare(site: &str, class: &str, columns: Vec<LocalColumn>, predicate: Option<LocalPredicate>) -> SubQuery {
    SubQuery { site: site.into(), local_class: class.into(), columns, predicate, guards: vec![], purpose: Purpose::Data }
}

fn s(x: &str) -> Value {
    Value::Str(x.into())
}

fn hq(dir: &Path) -> RelationalAdapter {
    RelationalAdapter::open("hq".into(), &dir.join("hq"), vec![]).unwrap()
}

#[test]
fn relational_translation() {
    let d = acme_copy();
    let a = hq(d.path());
    let sal = col("SAL", T_FLOAT);
    let q = bare("hq", "EMP", vec![col("ENAME", T_STR)], Some(LocalPredicate { disjuncts: vec![vec![cmp(sal, CmpOp::Gt, Value::Float(50000.0))]] }));
    assert_eq!(a.translate_query(&q), "SELECT ENAME FROM EMP WHERE SAL > 50000.0");

    let q = bare("hq", "EMP", vec![col("ENO", T_INT), col("ENAME", T_STR)], None);
    assert_eq!(a.translate_query(&q), "SELECT ENO, ENAME FROM EMP");

    let name = col("ENAME", T_STR);
    let q = bare("hq", "EMP", vec![col("ENO", T_INT)], Some(LocalPredicate { disjuncts: vec![vec![cmp(name, CmpOp::Eq, s("O'Hara"))]] }));
    assert_eq!(a.translate_query(&q), "SELECT ENO FROM EMP WHERE ENAME = 'O''Hara'");
}

#[test]
fn relational_translation_of_casts_defaults_and_or() {
    let d = acme_copy();
    let a = hq(d.path());
    let mut eno = col("ENO", T_FLOAT);
    eno.cast = Some(Cast::new(T_INT, T_FLOAT));
    let mut dept = col("DEPT", T_STR);
    dept.default = Some(s("none"));
    let p = LocalPredicate {
        disjuncts: vec![
            vec![cmp(eno.clone(), CmpOp::Ge, Value::Float(2.0)), cmp(dept.clone(), CmpOp::Ne, s("R&D"))],
            vec![cmp(col("ENAME", T_STR), CmpOp::Eq, s("Alice"))],
        ],
    };
    let q = bare("hq", "EMP", vec![eno, dept, col("missing", T_INT)], Some(p));
    assert_eq!(
        a.translate_query(&q),
        "SELECT CAST(ENO AS DOUBLE), COALESCE(DEPT, 'none'), NULL FROM EMP \
         WHERE (CAST(ENO AS DOUBLE) >= 2.0 AND COALESCE(DEPT, 'none') <> 'R&D') OR ENAME = 'Alice'"
    );
}

#[test]
fn relational_reads_fixture_and_dictionary() {
    let d = acme_copy();
    let a = hq(d.path());
    let schema = a.local_schema().unwrap();
    assert_eq!(schema.classes, acme().local_schema("hq").unwrap().classes);
    let r = a.run_subquery(&subquery("SELECT * FROM Employee", "hq")).unwrap();
    assert_eq!(r.rows, vec![
        vec![Value::Int(1), s("Alice"), Value::Float(72000.0), s("R&D")],
        vec![Value::Int(2), s("Raj"), Value::Float(48000.0), s("R&D")],
    ]);
}

fn staff_adapter(lines: &str) -> (TempDir, DocumentAdapter) {
    let d = acme_copy();
    fs::write(d.path().join("branch/staff.jsonl"), lines).unwrap();
    let a = DocumentAdapter::open("branch".into(), &d.path().join("branch"), vec![]).unwrap();
    (d, a)
}

#[test]
fn document_cast_and_filter() {
    let (_d, a) = staff_adapter("{\"id\":9,\"full_name\":\"Bo\",\"salary\":\"51000.5\",\"dept\":\"R&D\"}\n");
    let mut q = subquery("SELECT * FROM Employee WHERE salary > 50000", "branch");
    q.guards.clear();
    let r = a.run_subquery(&q).unwrap();
    assert_eq!(r.rows, vec![vec![Value::Int(9), s("Bo"), Value::Float(51000.5), s("R&D")]]);
    assert_eq!(r.skipped_casts, 0);
}

#[test]
fn document_missing_field_is_null() {
    let (_d, a) = staff_adapter("{\"id\":9,\"full_name\":\"Bo\",\"salary\":\"1\"}\n");
    let all = a.run_subquery(&subquery("SELECT emp_id, dept FROM Employee", "branch")).unwrap();
    assert_eq!(all.rows, vec![vec![Value::Int(9), Value::Null]]);
    let dept = col("dept", T_STR);
    let q = bare("branch", "staff", vec![col("id", T_INT)], Some(LocalPredicate { disjuncts: vec![vec![cmp(dept, CmpOp::Eq, s("R&D"))]] }));
    assert!(a.run_subquery(&q).unwrap().rows.is_empty());
}

#[test]
fn document_cast_failure_skips_row() {
    let (_d, a) = staff_adapter("{\"id\":9,\"full_name\":\"Bo\",\"salary\":\"abc\",\"dept\":\"R&D\"}\n{\"id\":[1]}\n");
    let r = a.run_subquery(&subquery("SELECT * FROM Employee", "branch")).unwrap();
    assert!(r.rows.is_empty());
    assert_eq!(r.skipped_casts, 2);
}

#[test]
fn document_unreadable_store() {
    let (_d, a) = staff_adapter("{\"id\":1}\nnot json\n");
    let err = a.run_subquery(&subquery("SELECT * FROM Employee", "branch")).unwrap_err();
    assert!(matches!(err, AdapterError::StoreUnreadable { ref detail, .. } if detail.starts_with("line 2")), "{err}");
}

fn credit(contents: &str) -> (TempDir, CsvAdapter) {
    let d = acme_copy();
    fs::write(d.path().join("fin/CREDIT.csv"), contents).unwrap();
    let a = CsvAdapter::open("fin".into(), &d.path().join("fin"), vec![]).unwrap();
    (d, a)
}

fn both_credit() -> SubQuery {
    bare("fin", "CREDIT", vec![col("cust_id", T_INT), col("limit", T_FLOAT)], None)
}

#[test]
fn csv_examples() {
    let (_d, a) = credit("cust_id,limit\n7,1000.0\n");
    assert_eq!(a.run_subquery(&both_credit()).unwrap().rows, vec![vec![Value::Int(7), Value::Float(1000.0)]]);

    let (_d, a) = credit("cust_id,limit\n");
    assert!(a.run_subquery(&both_credit()).unwrap().rows.is_empty());

    let (_d, a) = credit("cust_id\n7\n");
    let err = a.run_subquery(&both_credit()).unwrap_err();
    assert_eq!(err, AdapterError::HeaderMismatch { class: "CREDIT".into(), missing: vec!["limit".into()] });
}

#[test]
fn csv_empty_cell_is_null_and_bad_cell_is_skipped() {
    let (_d, a) = credit("cust_id,limit\n7,\n8,lots\n");
    let r = a.run_subquery(&both_credit()).unwrap();
    assert_eq!(r.rows, vec![vec![Value::Int(7), Value::Null]]);
    assert_eq!(r.skipped_casts, 1);
}

#[test]
fn missing_store_is_unreadable() {
    let d = acme_copy();
    fs::remove_file(d.path().join("fin/CREDIT.csv")).unwrap();
    let a = CsvAdapter::open("fin".into(), &d.path().join("fin"), vec![]).unwrap();
    assert!(matches!(a.run_subquery(&both_credit()), Err(AdapterError::StoreUnreadable { .. })));
    let q = bare("fin", "NOPE", vec![], None);
    assert_eq!(a.run_subquery(&q), Err(AdapterError::UnknownClass("NOPE".into())));
}

#[test]
fn file_translations() {
    let (_d, a) = credit("cust_id,limit\n");
    let lim = col("limit", T_FLOAT);
    let mut q = both_credit();
    q.predicate = Some(LocalPredicate { disjuncts: vec![vec![cmp(lim, CmpOp::Gt, Value::Float(100.0))]] });
    assert_eq!(a.translate_query(&q), "SCAN CREDIT.csv COLUMNS cust_id, limit WHERE limit > 100.0");

    let (_d, a) = staff_adapter("");
    let q = subquery("SELECT name FROM Employee WHERE salary > 50000", "branch");
    let text = a.translate_query(&q);
    assert!(text.starts_with("db.staff.find({\"$expr\":"), "{text}");
    assert!(text.contains("\"$convert\":{\"input\":\"$salary\",\"to\":\"double\"}"), "{text}");
    assert_eq!(a.translate_query(&q), text);
}

fn insert(site: &str, class: &str, values: Vec<(&str, Value)>) -> SubWrite {
    SubWrite {
        site: site.into(),
        local_class: class.into(),
        kind: WriteKind::Insert,
        values: values.into_iter().map(|(n, v)| (Ident::from(n), v)).collect(),
        predicate: None,
    }
}

fn exercise_writes(a: &dyn Adapter, site: &str) {
    let key = col("k", T_INT);
    let q = bare(site, "T", vec![key.clone(), col("v", T_STR)], None);
    assert_eq!(a.apply_write(&insert(site, "T", vec![("k", Value::Int(1)), ("v", s("one"))])).unwrap(), 1);
    assert_eq!(a.apply_write(&insert(site, "T", vec![("k", Value::Int(2))])).unwrap(), 1);
    assert_eq!(a.run_subquery(&q).unwrap().rows, vec![vec![Value::Int(1), s("one")], vec![Value::Int(2), Value::Null]]);

    let at = |k: i64| Some(LocalPredicate { disjuncts: vec![vec![cmp(key.clone(), CmpOp::Eq, Value::Int(k))]] });
    let upd = SubWrite { kind: WriteKind::Update, values: vec![("v".into(), s("two"))], predicate: at(2), ..insert(site, "T", vec![]) };
    assert_eq!(a.apply_write(&upd).unwrap(), 1);
    let del = SubWrite { kind: WriteKind::Delete, predicate: at(1), ..insert(site, "T", vec![]) };
    assert_eq!(a.apply_write(&del).unwrap(), 1);
    assert_eq!(a.apply_write(&del).unwrap(), 0);
    assert_eq!(a.run_subquery(&q).unwrap().rows, vec![vec![Value::Int(2), s("two")]]);
}

fn kv_class() -> LocalClassDef {
    LocalClassDef { name: "T".into(), attributes: vec![LocalAttributeDef::new("k", T_INT), LocalAttributeDef::new("v", T_STR)] }
}

#[test]
fn writes_persist_in_every_store() {
    for kind in [AdapterKind::Relational, AdapterKind::Document, AdapterKind::Csv] {
        let d = TempDir::new().unwrap();
        write_store(kind, d.path(), &kv_class(), &[]).unwrap();
        let a = open_adapter(kind, "x".into(), d.path(), vec![kv_class()]).unwrap();
        exercise_writes(a.as_ref(), "x");
        // A fresh adapter sees what the first one wrote.
        let again = open_adapter(kind, "x".into(), d.path(), vec![kv_class()]).unwrap();
        let q = bare("x", "T", vec![col("k", T_INT), col("v", T_STR)], None);
        assert_eq!(again.run_subquery(&q).unwrap().rows, vec![vec![Value::Int(2), s("two")]], "{kind}");
    }
}

#[test]
fn write_translations() {
    let d = acme_copy();
    let a = hq(d.path());
    let w = insert("hq", "CUST", vec![("ID", Value::Int(4)), ("CNAME", s("O'Hara"))]);
    assert_eq!(a.translate_write(&w), "INSERT INTO CUST (ID, CNAME) VALUES (4, 'O''Hara')");
    let id = col("ID", T_INT);
    let del = SubWrite {
        kind: WriteKind::Delete,
        values: vec![],
        predicate: Some(LocalPredicate { disjuncts: vec![vec![cmp(id, CmpOp::Eq, Value::Int(4))]] }),
        ..w
    };
    assert_eq!(a.translate_write(&del), "DELETE FROM CUST WHERE ID = 4");
}

// Adapter equivalence: the same logical rows behind each kind of store give
// the same answers.

fn mixed_class() -> LocalClassDef {
    LocalClassDef {
        name: "R".into(),
        attributes: vec![
            LocalAttributeDef::new("k", T_INT),
            LocalAttributeDef::new("name", T_STR),
            LocalAttributeDef::new("amount", T_FLOAT),
            LocalAttributeDef::new("code", T_STR),
        ],
    }
}

fn arb_value(ty: CanonicalType) -> BoxedStrategy<Value> {
    let v = match ty {
        CanonicalType::Int => (-5i64..5).prop_map(Value::Int).boxed(),
        CanonicalType::Float => (-4i32..4).prop_map(|x| Value::Float(x as f64 * 0.5)).boxed(),
        _ => prop::sample::select(vec!["a", "b", "O'Hara", "x,y", "q\"z"]).prop_map(|x| Value::Str(x.into())).boxed(),
    };
    prop_oneof![1 => Just(Value::Null), 4 => v].boxed()
}

fn arb_rows() -> impl Strategy<Value = Vec<Vec<Value>>> {
    let row = (arb_value(T_INT), arb_value(T_STR), arb_value(T_FLOAT), arb_value(T_STR)).prop_map(|(a, b, c, d)| vec![a, b, c, d]);
    prop::collection::vec(row, 0..20)
}

fn arb_query() -> impl Strategy<Value = SubQuery> {
    let class = mixed_class();
    let cols: Vec<LocalColumn> = class.attributes.iter().map(|a| col(a.name.as_str(), a.ty)).collect();
    let c2 = cols.clone();
    let comparison = (0..4usize, prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Ge]))
        .prop_flat_map(move |(i, op)| {
            let c = c2[i].clone();
            arb_value(c.ty).prop_map(move |v| cmp(c.clone(), op, v))
        });
    let predicate = prop::option::of(prop::collection::vec(prop::collection::vec(comparison, 1..3), 1..3));
    (prop::sample::subsequence((0..4usize).collect::<Vec<_>>(), 1..=4), predicate).prop_map(move |(idx, p)| {
        bare("x", "R", idx.iter().map(|&i| cols[i].clone()).collect(), p.map(|disjuncts| LocalPredicate { disjuncts }))
    })
}

fn sorted(mut rows: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    rows.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.sort_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn adapters_agree(rows in arb_rows(), queries in prop::collection::vec(arb_query(), 1..6)) {
        let dirs: Vec<(AdapterKind, TempDir)> = [AdapterKind::Relational, AdapterKind::Document, AdapterKind::Csv]
            .into_iter()
            .map(|k| (k, TempDir::new().unwrap()))
            .collect();
        let adapters: Vec<_> = dirs.iter().map(|(k, d)| {
            write_store(*k, d.path(), &mixed_class(), &rows).unwrap();
            open_adapter(*k, "x".into(), d.path(), vec![mixed_class()]).unwrap()
        }).collect();
        for q in &queries {
            let answers: Vec<_> = adapters.iter().map(|a| {
                let r = a.run_subquery(q).unwrap();
                (sorted(r.rows), r.skipped_casts)
            }).collect();
            prop_assert_eq!(&answers[0], &answers[1]);
            prop_assert_eq!(&answers[0], &answers[2]);
        }
    }
}
