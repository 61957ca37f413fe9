use super::plan::{LocalColumn, LocalOperand, LocalPredicate, SubQuery};
use crate::value::{Ident, Value};

/// What a sub-query makes of one local record.
#[derive(Debug, Clone, PartialEq)]
pub enum RowRead {
    /// A column could not be read in its declared type or cast.
    Skipped,
    /// Readable, but the pushed predicate is false.
    Rejected,
    Row(Vec<Value>),
}

impl LocalPredicate {
    /// `None` when some referenced column cannot be read.
    pub fn matches(&self, get: &impl Fn(&Ident) -> Value) -> Option<bool> {
        let read = |c: &LocalColumn| c.read(&get(&c.name));
        let mut any = false;
        for conj in &self.disjuncts {
            let mut all = true;
            for cmp in conj {
                let left = read(&cmp.column)?;
                let right = match &cmp.rhs {
                    LocalOperand::Value(v) => v.clone(),
                    LocalOperand::Column(c) => read(c)?,
                };
                all &= cmp.op.eval(&left, &right);
            }
            any |= all;
        }
        Some(any)
    }
}

impl SubQuery {
    /// Applies guards, the pushed predicate and the projection to one record.
    /// `get` returns the raw local value of a column (NULL when absent).
    pub fn read_row(&self, get: impl Fn(&Ident) -> Value) -> RowRead {
        if self.guards.iter().any(|g| g.read(&get(&g.name)).is_none()) {
            return RowRead::Skipped;
        }
        let mut row = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            match c.read(&get(&c.name)) {
                Some(v) => row.push(v),
                None => return RowRead::Skipped,
            }
        }
        match self.predicate.as_ref().map(|p| p.matches(&get)) {
            None | Some(Some(true)) => RowRead::Row(row),
            Some(Some(false)) => RowRead::Rejected,
            Some(None) => RowRead::Skipped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::plan::{LocalComparison, Purpose};
    use super::*;
    use crate::value::{CanonicalType, Cast, CmpOp};

    fn col(name: &str, ty: CanonicalType, cast: Option<Cast>) -> LocalColumn {
        LocalColumn { name: name.into(), ty, cast, default: None }
    }

    fn salary_query() -> SubQuery {
        let salary = col("salary", CanonicalType::Float, Some(Cast { from: CanonicalType::String, to: CanonicalType::Float }));
        SubQuery {
            site: "branch".into(),
            local_class: "staff".into(),
            columns: vec![col("id", CanonicalType::Int, None), salary.clone()],
            predicate: Some(LocalPredicate {
                disjuncts: vec![vec![LocalComparison {
                    column: salary,
                    op: CmpOp::Gt,
                    rhs: LocalOperand::Value(Value::Float(50000.0)),
                }]],
            }),
            guards: vec![],
            purpose: Purpose::Data,
        }
    }

    fn record(id: i64, salary: &str) -> impl Fn(&Ident) -> Value {
        let salary = salary.to_string();
        move |c: &Ident| match c.as_str() {
            "id" => Value::Int(id),
            "salary" => Value::Str(salary.clone()),
            _ => Value::Null,
        }
    }

    #[test]
    fn cast_then_filter() {
        let sq = salary_query();
        assert_eq!(sq.read_row(record(9, "51000.5")), RowRead::Row(vec![Value::Int(9), Value::Float(51000.5)]));
        assert_eq!(sq.read_row(record(9, "100")), RowRead::Rejected);
        assert_eq!(sq.read_row(record(9, "abc")), RowRead::Skipped);
    }

    #[test]
    fn default_fills_null() {
        let mut sq = salary_query();
        sq.predicate = None;
        sq.columns.push(LocalColumn { default: Some(Value::Str("n/a".into())), ..col("dept", CanonicalType::String, None) });
        let RowRead::Row(row) = sq.read_row(record(1, "1.0")) else { panic!() };
        assert_eq!(row[2], Value::Str("n/a".into()));
    }

    #[test]
    fn guards_skip_unreadable_rows() {
        let mut sq = salary_query();
        sq.predicate = None;
        sq.columns.truncate(1);
        sq.guards = vec![col("salary", CanonicalType::Float, Some(Cast { from: CanonicalType::String, to: CanonicalType::Float }))];
        assert_eq!(sq.read_row(record(1, "x")), RowRead::Skipped);
    }
}
