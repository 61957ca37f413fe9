//! The global query language: scanning, parsing and validation against a
//! catalog snapshot.

mod ast;
mod lexer;
mod parser;
mod validate;

pub use ast::*;
pub use lexer::{tokenize, Keyword, Token, TokenKind};
pub use parser::{parse, parse_predicate, parse_statement};
pub use validate::{
    check_comparison, check_view_query, validate, TypedBody, TypedSelect, TypedStatement, TypedWrite, WriteOp,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GqlError {
    #[error("unexpected character {ch:?} at offset {position}")]
    Lex { position: usize, ch: char },
    #[error("syntax error at offset {position}: expected {}, found {found}", .expected.join(" or "))]
    Syntax { position: usize, expected: Vec<String>, found: String },
    #[error("unknown class or view {0}")]
    UnknownClass(String),
    #[error("{class} has no attribute {attr}")]
    UnknownAttribute { class: String, attr: String },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("mapping for {0} is stale; re-run schema integration")]
    StaleMapping(String),
    #[error("{0} is a view; only SELECT is allowed against views")]
    ViewNotSelectable(String),
    #[error("invalid statement: {0}")]
    InvalidStatement(String),
}

impl GqlError {
    /// Stable error-kind string used on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            GqlError::Lex { .. } => "LEX_ERROR",
            GqlError::Syntax { .. } => "SYNTAX_ERROR",
            GqlError::UnknownClass(_) => "UNKNOWN_CLASS",
            GqlError::UnknownAttribute { .. } => "UNKNOWN_ATTRIBUTE",
            GqlError::TypeMismatch(_) => "TYPE_MISMATCH",
            GqlError::StaleMapping(_) => "STALE_MAPPING",
            GqlError::ViewNotSelectable(_) => "VIEW_NOT_SELECTABLE",
            GqlError::InvalidStatement(_) => "INVALID_STATEMENT",
        }
    }

    /// Byte offset into the statement text, for scanning and parsing errors.
    pub fn position(&self) -> Option<usize> {
        match self {
            GqlError::Lex { position, .. } | GqlError::Syntax { position, .. } => Some(*position),
            _ => None,
        }
    }
}
