//! Scalar layer of the common data model: identifiers, canonical types,
//! values and the legal coercion matrix.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An identifier stored as written but compared with ASCII case folded.
#[derive(Clone, Default)]
pub struct Ident(String);

impl Ident {
    pub fn new(s: impl Into<String>) -> Self {
        Ident(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Lowercased key for maps keyed by identifier.
    pub fn key(&self) -> String {
        self.0.to_ascii_lowercase()
    }

    pub fn matches(&self, other: &str) -> bool {
        self.0.eq_ignore_ascii_case(other)
    }

    /// Letters, digits and underscore, starting with a letter.
    pub fn is_well_formed(s: &str) -> bool {
        let mut chars = s.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.0.eq_ignore_ascii_case(&other.0)
    }
}

impl Eq for Ident {}

impl Ord for Ident {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.bytes().map(|b| b.to_ascii_lowercase()).cmp(other.0.bytes().map(|b| b.to_ascii_lowercase()))
    }
}

impl PartialOrd for Ident {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq<str> for Ident {
    fn eq(&self, other: &str) -> bool {
        self.0.eq_ignore_ascii_case(other)
    }
}

impl PartialEq<&str> for Ident {
    fn eq(&self, other: &&str) -> bool {
        self.0.eq_ignore_ascii_case(other)
    }
}

impl Hash for Ident {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for b in self.0.bytes() {
            state.write_u8(b.to_ascii_lowercase());
        }
        state.write_u8(0xff);
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident(s.to_string())
    }
}

impl From<String> for Ident {
    fn from(s: String) -> Self {
        Ident(s)
    }
}

impl Serialize for Ident {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Ident {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(Ident)
    }
}

/// The closed set of scalar types. Every type additionally admits NULL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CanonicalType {
    Int,
    Float,
    String,
    Bool,
}

impl CanonicalType {
    pub const ALL: [CanonicalType; 4] = [
        CanonicalType::Int,
        CanonicalType::Float,
        CanonicalType::String,
        CanonicalType::Bool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalType::Int => "INT",
            CanonicalType::Float => "FLOAT",
            CanonicalType::String => "STRING",
            CanonicalType::Bool => "BOOL",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, CanonicalType::Int | CanonicalType::Float)
    }

    /// Whether values of the two types may appear on either side of a comparison.
    pub fn comparable_with(self, other: CanonicalType) -> bool {
        self == other || (self.is_numeric() && other.is_numeric())
    }
}

impl fmt::Display for CanonicalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonicalType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "INT" => Ok(CanonicalType::Int),
            "FLOAT" => Ok(CanonicalType::Float),
            "STRING" => Ok(CanonicalType::String),
            "BOOL" => Ok(CanonicalType::Bool),
            other => Err(format!("unknown canonical type {other:?}")),
        }
    }
}

/// A coercion from a local type into a global type.
///
/// Legal casts: identity, STRING to INT/FLOAT/BOOL by strict parse, INT to FLOAT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cast {
    pub from: CanonicalType,
    pub to: CanonicalType,
}

impl Cast {
    pub fn new(from: CanonicalType, to: CanonicalType) -> Self {
        Cast { from, to }
    }

    pub fn is_legal(self) -> bool {
        use CanonicalType::*;
        matches!(
            (self.from, self.to),
            (a, b) if a == b
        ) || matches!(
            (self.from, self.to),
            (String, Int) | (String, Float) | (String, Bool) | (Int, Float)
        )
    }

    /// Applies the cast to a local value. `None` means the value does not convert.
    pub fn apply(self, v: &Value) -> Option<Value> {
        if v.is_null() {
            return Some(Value::Null);
        }
        if self.from == self.to {
            return v.conforms_to(self.to).then(|| v.clone());
        }
        match (self.from, self.to, v) {
            (CanonicalType::String, to, Value::Str(s)) => parse_strict(s, to),
            (CanonicalType::Int, CanonicalType::Float, Value::Int(i)) => Some(Value::Float(*i as f64)),
            _ => None,
        }
    }

    /// Renders a global value back into the local representation. `None` when
    /// the value has no exact local counterpart.
    pub fn invert(self, v: &Value) -> Option<Value> {
        if v.is_null() {
            return Some(Value::Null);
        }
        if self.from == self.to {
            return Some(v.clone());
        }
        match (self.from, self.to, v) {
            (CanonicalType::String, CanonicalType::Int, Value::Int(i)) => Some(Value::Str(i.to_string())),
            (CanonicalType::String, CanonicalType::Float, Value::Float(f)) => Some(Value::Str(f.to_string())),
            (CanonicalType::String, CanonicalType::Bool, Value::Bool(b)) => Some(Value::Str(b.to_string())),
            (CanonicalType::Int, CanonicalType::Float, Value::Float(f)) => {
                if f.fract() == 0.0 && f.abs() < 9.0e15 {
                    Some(Value::Int(*f as i64))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

impl fmt::Display for Cast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

impl FromStr for Cast {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (from, to) = s
            .split_once("->")
            .ok_or_else(|| format!("cast {s:?} is not of the form FROM->TO"))?;
        Ok(Cast::new(from.trim().parse()?, to.trim().parse()?))
    }
}

impl Serialize for Cast {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Cast {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Strict textual parse into a canonical type: no surrounding whitespace,
/// no partial matches, finite floats only.
pub fn parse_strict(s: &str, ty: CanonicalType) -> Option<Value> {
    match ty {
        CanonicalType::String => Some(Value::Str(s.to_string())),
        CanonicalType::Int => s.parse::<i64>().ok().map(Value::Int),
        CanonicalType::Float => {
            let looks_numeric = !s.is_empty()
                && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
            if !looks_numeric {
                return None;
            }
            s.parse::<f64>().ok().filter(|f| f.is_finite()).map(Value::Float)
        }
        CanonicalType::Bool => match s {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
    }
}

/// A nullable canonical value.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn type_of(&self) -> Option<CanonicalType> {
        match self {
            Value::Null => None,
            Value::Int(_) => Some(CanonicalType::Int),
            Value::Float(_) => Some(CanonicalType::Float),
            Value::Str(_) => Some(CanonicalType::String),
            Value::Bool(_) => Some(CanonicalType::Bool),
        }
    }

    pub fn conforms_to(&self, ty: CanonicalType) -> bool {
        self.type_of().is_none_or(|t| t == ty)
    }

    /// Coerces a literal into an attribute type; INT widens to FLOAT, nothing else converts.
    pub fn coerce_to(&self, ty: CanonicalType) -> Option<Value> {
        match (self, ty) {
            (Value::Null, _) => Some(Value::Null),
            (Value::Int(i), CanonicalType::Float) => Some(Value::Float(*i as f64)),
            (v, t) if v.conforms_to(t) => Some(v.clone()),
            _ => None,
        }
    }

    /// Renders as a literal in the global query language.
    pub fn to_literal(&self) -> String {
        match self {
            Value::Null => "NULL".to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
            Value::Bool(true) => "TRUE".to_string(),
            Value::Bool(false) => "FALSE".to_string(),
        }
    }

    /// Ordering used by sorting: NULL before everything, numerics compared by
    /// value, floats by total order. Only meaningful within one column type.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Null, _) => Ordering::Less,
            (_, Value::Null) => Ordering::Greater,
            (a, b) => a.partial_compare(b).unwrap_or(Ordering::Equal),
        }
    }

    fn partial_compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Float(a), Value::Float(b)) => Some(a.total_cmp(b)),
            (Value::Int(a), Value::Float(b)) => Some((*a as f64).total_cmp(b)),
            (Value::Float(a), Value::Int(b)) => Some(a.total_cmp(&(*b as f64))),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Float(f) => serde_json::Number::from_f64(*f)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Str(s) => serde_json::Value::String(s.clone()),
            Value::Bool(b) => serde_json::Value::Bool(*b),
        }
    }

    /// Reads a JSON scalar. Integral JSON numbers become INT, others FLOAT.
    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Null => Some(Value::Null),
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::String(s) => Some(Value::Str(s.clone())),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Some(Value::Int(i)),
                None => n.as_f64().map(Value::Float),
            },
            _ => None,
        }
    }
}

/// Bitwise equality on floats so that rows can be compared as multisets.
impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Null => {}
            Value::Int(i) => i.hash(state),
            Value::Float(f) => f.to_bits().hash(state),
            Value::Str(s) => s.hash(state),
            Value::Bool(b) => b.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&format_float(*x)),
            Value::Str(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Value::from_json(&v).ok_or_else(|| serde::de::Error::custom("expected a scalar value"))
    }
}

/// Float rendering that always carries a decimal point, so it lexes back as FLOAT.
pub fn format_float(f: f64) -> String {
    let s = f.to_string();
    if s.contains('.') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Comparison operators of the query language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// Two-valued comparison: anything involving NULL is false.
    pub fn eval(self, left: &Value, right: &Value) -> bool {
        if left.is_null() || right.is_null() {
            return false;
        }
        let Some(ord) = left.partial_compare(right) else {
            return false;
        };
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
