//! Core of a federated multidatabase: the global catalog, schema integration
//! pipeline, global query language, query decomposition, and the executor
//! that fans sub-queries out to sites and composes their results.

pub mod catalog;
pub mod decompose;
pub mod exec;
pub mod gql;
pub mod pipeline;
pub mod value;

pub mod testing;

pub use value::{CanonicalType, Cast, CmpOp, Ident, Value};
