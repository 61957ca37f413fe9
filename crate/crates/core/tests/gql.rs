use std::cmp::Ordering;

use mdbs_core::gql::{parse_predicate, parse_statement, Comparison, Conjunction, Operand, Predicate};
use mdbs_core::{CmpOp, Value};
use proptest::prelude::*;

const OPS: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

fn arb_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-1_000_000_000_000i64..1_000_000_000_000).prop_map(Value::Int),
        any::<f64>().prop_filter("finite", |f| f.is_finite()).prop_map(Value::Float),
        "[a-zA-Z0-9 ',_üß&-]{0,12}".prop_map(Value::Str),
        any::<bool>().prop_map(Value::Bool),
    ]
}

fn arb_ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b_2", "Name", "x1", "credit_limit"]).prop_map(String::from)
}

fn arb_comparison() -> impl Strategy<Value = Comparison> {
    let rhs = prop_oneof![3 => arb_value().prop_map(Operand::Literal), 1 => arb_ident().prop_map(|a| Operand::Attr(a.into()))];
    (arb_ident(), prop::sample::select(OPS.to_vec()), rhs).prop_map(|(a, op, rhs)| Comparison::new(a, op, rhs))
}

fn arb_predicate() -> impl Strategy<Value = Predicate> {
    prop::collection::vec(prop::collection::vec(arb_comparison(), 1..4).prop_map(|comparisons| Conjunction { comparisons }), 1..4)
        .prop_map(|disjuncts| Predicate { disjuncts })
}

/// Independent comparison: numerics by value, strings bytewise, false < true.
fn expected(op: CmpOp, l: &Value, r: &Value) -> bool {
    let ord = match (l, r) {
        (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
        (Value::Int(a), Value::Float(b)) => (*a as f64).partial_cmp(b),
        (Value::Float(a), Value::Int(b)) => a.partial_cmp(&(*b as f64)),
        (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
        (Value::Str(a), Value::Str(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
        (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
        _ => None,
    };
    let Some(ord) = ord else { return false };
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

fn arb_scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        (-5i64..5).prop_map(Value::Int),
        (-20i32..20).prop_map(|n| Value::Float(n as f64 / 4.0)),
        prop::sample::select(vec!["", "a", "B", "ab", "é"]).prop_map(|s| Value::Str(s.into())),
        any::<bool>().prop_map(Value::Bool),
    ]
}

proptest! {
    #[test]
    fn predicates_round_trip_through_text(p in arb_predicate()) {
        let text = p.to_string();
        prop_assert_eq!(parse_predicate(&text).unwrap(), p, "{}", text);
    }

    #[test]
    fn comparison_matches_reference(op in prop::sample::select(OPS.to_vec()), l in arb_scalar(), r in arb_scalar()) {
        prop_assert_eq!(op.eval(&l, &r), expected(op, &l, &r));
    }

    #[test]
    fn literals_survive_a_statement(v in arb_value()) {
        let text = format!("SELECT * FROM T WHERE a = {}", v.to_literal());
        let stmt = parse_statement(&text).unwrap();
        prop_assert_eq!(parse_statement(&stmt.to_string()).unwrap(), stmt);
    }
}

#[test]
fn statements_round_trip() {
    for text in [
        "SELECT * FROM Employee",
        "SELECT name, salary FROM Employee WHERE salary > 50000.0 AND dept = 'R&D' OR name = 'O''Hara' ORDER BY salary DESC LIMIT 3",
        "INSERT INTO Customer (cust_id, name) VALUES (4, 'Hooli')",
        "UPDATE Customer SET credit_limit = 1.5 WHERE cust_id = 4",
        "DELETE FROM Customer WHERE cust_id != -4",
    ] {
        let stmt = parse_statement(text).unwrap();
        assert_eq!(parse_statement(&stmt.to_string()).unwrap(), stmt, "{text}");
    }
}
