use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::{CmpOp, Ident, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Select(Select),
    Insert(Insert),
    Update(Update),
    Delete(Delete),
}

impl Statement {
    pub fn target(&self) -> &Ident {
        match self {
            Statement::Select(s) => &s.from,
            Statement::Insert(i) => &i.class,
            Statement::Update(u) => &u.class,
            Statement::Delete(d) => &d.class,
        }
    }

    pub fn is_write(&self) -> bool {
        !matches!(self, Statement::Select(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub from: Ident,
    pub projection: Projection,
    pub predicate: Option<Predicate>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Star,
    Columns(Vec<Ident>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBy {
    pub attr: Ident,
    pub dir: SortDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SortDir {
    Asc,
    Desc,
}

impl fmt::Display for SortDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SortDir::Asc => "ASC",
            SortDir::Desc => "DESC",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insert {
    pub class: Ident,
    pub columns: Vec<Ident>,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub class: Ident,
    pub assignments: Vec<(Ident, Value)>,
    pub predicate: Option<Predicate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delete {
    pub class: Ident,
    pub predicate: Option<Predicate>,
}

/// A disjunction of conjunctions of comparisons; the grammar admits no other shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub disjuncts: Vec<Conjunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conjunction {
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub attr: Ident,
    pub op: CmpOp,
    pub rhs: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Literal(Value),
    Attr(Ident),
}

impl Comparison {
    pub fn new(attr: impl Into<Ident>, op: CmpOp, rhs: Operand) -> Self {
        Comparison { attr: attr.into(), op, rhs }
    }

    pub fn attrs(&self) -> impl Iterator<Item = &Ident> {
        let rhs = match &self.rhs {
            Operand::Attr(a) => Some(a),
            Operand::Literal(_) => None,
        };
        std::iter::once(&self.attr).chain(rhs)
    }

    /// Evaluates against a row given a column lookup. Unknown columns read as NULL.
    pub fn eval<'a>(&self, lookup: &impl Fn(&Ident) -> Option<&'a Value>) -> bool {
        let left = lookup(&self.attr).unwrap_or(&Value::Null);
        match &self.rhs {
            Operand::Literal(v) => self.op.eval(left, v),
            Operand::Attr(a) => self.op.eval(left, lookup(a).unwrap_or(&Value::Null)),
        }
    }
}

impl Predicate {
    pub fn single(c: Comparison) -> Self {
        Predicate { disjuncts: vec![Conjunction { comparisons: vec![c] }] }
    }

    pub fn conjunction(comparisons: Vec<Comparison>) -> Option<Self> {
        (!comparisons.is_empty()).then(|| Predicate { disjuncts: vec![Conjunction { comparisons }] })
    }

    /// The top-level AND conjuncts when the predicate is a single conjunction.
    pub fn as_conjunction(&self) -> Option<&[Comparison]> {
        match self.disjuncts.as_slice() {
            [only] => Some(&only.comparisons),
            _ => None,
        }
    }

    pub fn attrs(&self) -> impl Iterator<Item = &Ident> {
        self.disjuncts.iter().flat_map(|d| d.comparisons.iter()).flat_map(|c| c.attrs())
    }

    pub fn comparisons(&self) -> impl Iterator<Item = &Comparison> {
        self.disjuncts.iter().flat_map(|d| d.comparisons.iter())
    }

    pub fn comparisons_mut(&mut self) -> impl Iterator<Item = &mut Comparison> {
        self.disjuncts.iter_mut().flat_map(|d| d.comparisons.iter_mut())
    }

    pub fn eval<'a>(&self, lookup: &impl Fn(&Ident) -> Option<&'a Value>) -> bool {
        self.disjuncts.iter().any(|d| d.comparisons.iter().all(|c| c.eval(lookup)))
    }

    /// Logical AND, distributed back into disjunctive form.
    pub fn and(&self, other: &Predicate) -> Predicate {
        let mut disjuncts = Vec::with_capacity(self.disjuncts.len() * other.disjuncts.len());
        for a in &self.disjuncts {
            for b in &other.disjuncts {
                let mut comparisons = a.comparisons.clone();
                comparisons.extend(b.comparisons.iter().cloned());
                disjuncts.push(Conjunction { comparisons });
            }
        }
        Predicate { disjuncts }
    }

    pub fn and_opt(a: Option<&Predicate>, b: Option<&Predicate>) -> Option<Predicate> {
        match (a, b) {
            (Some(a), Some(b)) => Some(a.and(b)),
            (Some(p), None) | (None, Some(p)) => Some(p.clone()),
            (None, None) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Literal(v) => f.write_str(&v.to_literal()),
            Operand::Attr(a) => write!(f, "{a}"),
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attr, self.op, self.rhs)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" OR ")?;
            }
            for (j, c) in d.comparisons.iter().enumerate() {
                if j > 0 {
                    f.write_str(" AND ")?;
                }
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Select(s) => {
                f.write_str("SELECT ")?;
                match &s.projection {
                    Projection::Star => f.write_str("*")?,
                    Projection::Columns(cols) => write_list(f, cols)?,
                }
                write!(f, " FROM {}", s.from)?;
                if let Some(p) = &s.predicate {
                    write!(f, " WHERE {p}")?;
                }
                if let Some(o) = &s.order_by {
                    write!(f, " ORDER BY {} {}", o.attr, o.dir)?;
                }
                if let Some(n) = s.limit {
                    write!(f, " LIMIT {n}")?;
                }
                Ok(())
            }
            Statement::Insert(i) => {
                write!(f, "INSERT INTO {} (", i.class)?;
                write_list(f, &i.columns)?;
                f.write_str(") VALUES (")?;
                let lits: Vec<String> = i.values.iter().map(Value::to_literal).collect();
                write_list(f, &lits)?;
                f.write_str(")")
            }
            Statement::Update(u) => {
                write!(f, "UPDATE {} SET ", u.class)?;
                let sets: Vec<String> = u
                    .assignments
                    .iter()
                    .map(|(a, v)| format!("{a} = {}", v.to_literal()))
                    .collect();
                write_list(f, &sets)?;
                if let Some(p) = &u.predicate {
                    write!(f, " WHERE {p}")?;
                }
                Ok(())
            }
            Statement::Delete(d) => {
                write!(f, "DELETE FROM {}", d.class)?;
                if let Some(p) = &d.predicate {
                    write!(f, " WHERE {p}")?;
                }
                Ok(())
            }
        }
    }
}
