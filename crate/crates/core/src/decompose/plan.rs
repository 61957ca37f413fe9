use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::catalog::{AttributeDef, MappingKind};
use crate::gql::{Predicate, SortDir};
use crate::value::{CanonicalType, Cast, CmpOp, Ident, Value};

/// A local attribute as read by a sub-query: cast into the global type, with
/// the mapping default standing in for NULL or absent values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalColumn {
    pub name: Ident,
    /// Global type produced after the cast.
    #[serde(rename = "type")]
    pub ty: CanonicalType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cast: Option<Cast>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
}

impl LocalColumn {
    /// The local representation type (the cast's source type, if any).
    pub fn local_type(&self) -> CanonicalType {
        self.cast.map(|c| c.from).unwrap_or(self.ty)
    }

    /// Converts a raw local value into the global value. `None` when the cast fails.
    pub fn read(&self, raw: &Value) -> Option<Value> {
        let v = match self.cast {
            Some(cast) => cast.apply(raw)?,
            None if raw.conforms_to(self.ty) => raw.clone(),
            None => return None,
        };
        match (&v, &self.default) {
            (Value::Null, Some(d)) => Some(d.clone()),
            _ => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalOperand {
    Value(Value),
    Column(LocalColumn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalComparison {
    pub column: LocalColumn,
    pub op: CmpOp,
    pub rhs: LocalOperand,
}

/// A pushed predicate, phrased over local attribute names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPredicate {
    pub disjuncts: Vec<Vec<LocalComparison>>,
}

impl LocalPredicate {
    pub fn columns(&self) -> impl Iterator<Item = &LocalColumn> {
        self.disjuncts.iter().flatten().flat_map(|c| {
            let rhs = match &c.rhs {
                LocalOperand::Column(col) => Some(col),
                LocalOperand::Value(_) => None,
            };
            std::iter::once(&c.column).chain(rhs)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Purpose {
    Data,
    /// Contributes only the join key so the vertical inner join sees every fragment.
    KeySide,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Data => "DATA",
            Purpose::KeySide => "KEY_SIDE",
        })
    }
}

/// One site's share of a read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubQuery {
    pub site: Ident,
    pub local_class: Ident,
    /// Projected columns, in output order.
    pub columns: Vec<LocalColumn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<LocalPredicate>,
    /// Other mapped columns that must read cleanly for a row to exist.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guards: Vec<LocalColumn>,
    pub purpose: Purpose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WriteKind {
    Insert,
    Update,
    Delete,
}

/// One site's share of a write. Values are already in local representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubWrite {
    pub site: Ident,
    pub local_class: Ident,
    pub kind: WriteKind,
    /// INSERT column values or UPDATE set-list.
    #[serde(default)]
    pub values: Vec<(Ident, Value)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<LocalPredicate>,
}

fn ser_pred<S: Serializer>(p: &Predicate, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

/// How sub-query outputs are put back together into the global answer.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CompositionNode {
    /// Output of `subqueries[subquery]`, labelled with global attribute names.
    Scan { subquery: usize, site: Ident, columns: Vec<Ident> },
    /// Bag union aligned by name; attributes a branch lacks read as NULL.
    UnionAll { columns: Vec<Ident>, inputs: Vec<CompositionNode> },
    /// Inner equi-join of all inputs on the key.
    JoinOn { key: Ident, inputs: Vec<CompositionNode> },
    Filter {
        #[serde(serialize_with = "ser_pred")]
        predicate: Predicate,
        input: Box<CompositionNode>,
    },
    Sort { attr: Ident, dir: SortDir, input: Box<CompositionNode> },
    Limit { n: u64, input: Box<CompositionNode> },
    Project { attrs: Vec<Ident>, input: Box<CompositionNode> },
}

impl CompositionNode {
    pub fn children(&self) -> Vec<&CompositionNode> {
        match self {
            CompositionNode::Scan { .. } => Vec::new(),
            CompositionNode::UnionAll { inputs, .. } | CompositionNode::JoinOn { inputs, .. } => {
                inputs.iter().collect()
            }
            CompositionNode::Filter { input, .. }
            | CompositionNode::Sort { input, .. }
            | CompositionNode::Limit { input, .. }
            | CompositionNode::Project { input, .. } => vec![input],
        }
    }

    /// Number of nodes in the tree satisfying `pred`.
    pub fn count(&self, pred: &impl Fn(&CompositionNode) -> bool) -> usize {
        usize::from(pred(self)) + self.children().iter().map(|c| c.count(pred)).sum::<usize>()
    }

    pub fn has_filter(&self) -> bool {
        self.count(&|n| matches!(n, CompositionNode::Filter { .. })) > 0
    }

    pub fn has_join(&self) -> bool {
        self.count(&|n| matches!(n, CompositionNode::JoinOn { .. })) > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionPlan {
    /// Rendering of the statement the plan was built from.
    pub statement: String,
    pub catalog_version: u64,
    pub class: Ident,
    pub kind: MappingKind,
    pub subqueries: Vec<SubQuery>,
    pub composition: CompositionNode,
    pub output: Vec<AttributeDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WritePlan {
    pub statement: String,
    pub catalog_version: u64,
    pub class: Ident,
    pub kind: MappingKind,
    pub subwrites: Vec<SubWrite>,
}
