//! Recursive-descent parser for the global query language.
//!
//! ```text
//! select := SELECT (STAR | ident (, ident)*) FROM ident [WHERE pred]
//!           [ORDER BY ident [ASC|DESC]] [LIMIT int]
//! pred   := conj (OR conj)*
//! conj   := cmp (AND cmp)*
//! cmp    := ident op (literal | ident)
//! insert := INSERT INTO ident ( ident (, ident)* ) VALUES ( literal (, literal)* )
//! update := UPDATE ident SET ident = literal (, ident = literal)* [WHERE pred]
//! delete := DELETE FROM ident [WHERE pred]
//! ```
//!
//! A single trailing `;` is tolerated.

use crate::value::{CmpOp, Ident, Value};

use super::ast::*;
use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::GqlError;

pub fn parse(tokens: &[Token]) -> Result<Statement, GqlError> {
    let end = tokens.last().map(|t| t.pos + 1).unwrap_or(0);
    let mut p = Parser { tokens, idx: 0, end };
    let stmt = p.statement()?;
    if p.peek_is(&TokenKind::Semicolon) {
        p.idx += 1;
    }
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.pos, &["end of statement"], &t.kind.to_string()));
    }
    Ok(stmt)
}

/// Tokenizes and parses in one step.
pub fn parse_statement(text: &str) -> Result<Statement, GqlError> {
    let tokens = tokenize(text)?;
    let end = text.len();
    let mut p = Parser { tokens: &tokens, idx: 0, end };
    let stmt = p.statement()?;
    if p.peek_is(&TokenKind::Semicolon) {
        p.idx += 1;
    }
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.pos, &["end of statement"], &t.kind.to_string()));
    }
    Ok(stmt)
}

/// Parses a bare predicate (used for fragment routing conditions).
pub fn parse_predicate(text: &str) -> Result<Predicate, GqlError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens: &tokens, idx: 0, end: text.len() };
    let pred = p.predicate()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.pos, &["AND", "OR", "end of predicate"], &t.kind.to_string()));
    }
    Ok(pred)
}

struct Parser<'a> {
    tokens: &'a [Token],
    idx: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.idx)
    }

    fn peek_is(&self, kind: &TokenKind) -> bool {
        self.peek().is_some_and(|t| &t.kind == kind)
    }

    fn peek_keyword(&self, k: Keyword) -> bool {
        self.peek_is(&TokenKind::Keyword(k))
    }

    fn error_at(&self, position: usize, expected: &[&str], found: &str) -> GqlError {
        GqlError::Syntax {
            position,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.to_string(),
        }
    }

    fn unexpected(&self, expected: &[&str]) -> GqlError {
        match self.peek() {
            Some(t) => self.error_at(t.pos, expected, &t.kind.to_string()),
            None => self.error_at(self.end, expected, "end of input"),
        }
    }

    fn expect_keyword(&mut self, k: Keyword) -> Result<(), GqlError> {
        if self.peek_keyword(k) {
            self.idx += 1;
            Ok(())
        } else {
            Err(self.unexpected(&[k.as_str()]))
        }
    }

    fn expect(&mut self, kind: TokenKind, label: &str) -> Result<(), GqlError> {
        if self.peek_is(&kind) {
            self.idx += 1;
            Ok(())
        } else {
            Err(self.unexpected(&[label]))
        }
    }

    fn ident(&mut self) -> Result<Ident, GqlError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(s), .. }) => {
                self.idx += 1;
                Ok(Ident::new(s.clone()))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn literal(&mut self) -> Result<Value, GqlError> {
        let v = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Int(i)) => Value::Int(*i),
            Some(TokenKind::Float(f)) => Value::Float(*f),
            Some(TokenKind::Str(s)) => Value::Str(s.clone()),
            Some(TokenKind::Keyword(Keyword::True)) => Value::Bool(true),
            Some(TokenKind::Keyword(Keyword::False)) => Value::Bool(false),
            Some(TokenKind::Keyword(Keyword::Null)) => Value::Null,
            _ => return Err(self.unexpected(&["literal"])),
        };
        self.idx += 1;
        Ok(v)
    }

    fn statement(&mut self) -> Result<Statement, GqlError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Keyword(Keyword::Select)) => self.select().map(Statement::Select),
            Some(TokenKind::Keyword(Keyword::Insert)) => self.insert().map(Statement::Insert),
            Some(TokenKind::Keyword(Keyword::Update)) => self.update().map(Statement::Update),
            Some(TokenKind::Keyword(Keyword::Delete)) => self.delete().map(Statement::Delete),
            _ => Err(self.unexpected(&["SELECT", "INSERT", "UPDATE", "DELETE"])),
        }
    }

    fn select(&mut self) -> Result<Select, GqlError> {
        self.expect_keyword(Keyword::Select)?;
        let projection = if self.peek_is(&TokenKind::Star) {
            self.idx += 1;
            Projection::Star
        } else if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Ident(_))) {
            Projection::Columns(self.ident_list()?)
        } else {
            return Err(self.unexpected(&["*", "identifier"]));
        };
        self.expect_keyword(Keyword::From)?;
        let from = self.ident()?;
        let predicate = self.where_clause()?;
        let order_by = if self.peek_keyword(Keyword::Order) {
            self.idx += 1;
            self.expect_keyword(Keyword::By)?;
            let attr = self.ident()?;
            let dir = if self.peek_keyword(Keyword::Asc) {
                self.idx += 1;
                SortDir::Asc
            } else if self.peek_keyword(Keyword::Desc) {
                self.idx += 1;
                SortDir::Desc
            } else {
                SortDir::Asc
            };
            Some(OrderBy { attr, dir })
        } else {
            None
        };
        let limit = if self.peek_keyword(Keyword::Limit) {
            self.idx += 1;
            match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Int(n)) if *n >= 0 => {
                    let n = *n as u64;
                    self.idx += 1;
                    Some(n)
                }
                _ => return Err(self.unexpected(&["non-negative integer"])),
            }
        } else {
            None
        };
        Ok(Select { from, projection, predicate, order_by, limit })
    }

    fn insert(&mut self) -> Result<Insert, GqlError> {
        self.expect_keyword(Keyword::Insert)?;
        self.expect_keyword(Keyword::Into)?;
        let class = self.ident()?;
        self.expect(TokenKind::LParen, "(")?;
        let columns = self.ident_list()?;
        self.expect(TokenKind::RParen, ")")?;
        self.expect_keyword(Keyword::Values)?;
        self.expect(TokenKind::LParen, "(")?;
        let mut values = vec![self.literal()?];
        while self.peek_is(&TokenKind::Comma) {
            self.idx += 1;
            values.push(self.literal()?);
        }
        self.expect(TokenKind::RParen, ")")?;
        Ok(Insert { class, columns, values })
    }

    fn update(&mut self) -> Result<Update, GqlError> {
        self.expect_keyword(Keyword::Update)?;
        let class = self.ident()?;
        self.expect_keyword(Keyword::Set)?;
        let mut assignments = vec![self.assignment()?];
        while self.peek_is(&TokenKind::Comma) {
            self.idx += 1;
            assignments.push(self.assignment()?);
        }
        let predicate = self.where_clause()?;
        Ok(Update { class, assignments, predicate })
    }

    fn assignment(&mut self) -> Result<(Ident, Value), GqlError> {
        let attr = self.ident()?;
        self.expect(TokenKind::Op(CmpOp::Eq), "=")?;
        Ok((attr, self.literal()?))
    }

    fn delete(&mut self) -> Result<Delete, GqlError> {
        self.expect_keyword(Keyword::Delete)?;
        self.expect_keyword(Keyword::From)?;
        let class = self.ident()?;
        let predicate = self.where_clause()?;
        Ok(Delete { class, predicate })
    }

    fn ident_list(&mut self) -> Result<Vec<Ident>, GqlError> {
        let mut out = vec![self.ident()?];
        while self.peek_is(&TokenKind::Comma) {
            self.idx += 1;
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn where_clause(&mut self) -> Result<Option<Predicate>, GqlError> {
        if self.peek_keyword(Keyword::Where) {
            self.idx += 1;
            Ok(Some(self.predicate()?))
        } else {
            Ok(None)
        }
    }

    fn predicate(&mut self) -> Result<Predicate, GqlError> {
        let mut disjuncts = vec![self.conjunction()?];
        while self.peek_keyword(Keyword::Or) {
            self.idx += 1;
            disjuncts.push(self.conjunction()?);
        }
        Ok(Predicate { disjuncts })
    }

    fn conjunction(&mut self) -> Result<Conjunction, GqlError> {
        let mut comparisons = vec![self.comparison()?];
        while self.peek_keyword(Keyword::And) {
            self.idx += 1;
            comparisons.push(self.comparison()?);
        }
        Ok(Conjunction { comparisons })
    }

    fn comparison(&mut self) -> Result<Comparison, GqlError> {
        let attr = self.ident()?;
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Op(op)) => *op,
            _ => return Err(self.unexpected(&["=", "!=", "<", "<=", ">", ">="])),
        };
        self.idx += 1;
        let rhs = if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Ident(_))) {
            Operand::Attr(self.ident()?)
        } else {
            match self.literal() {
                Ok(v) => Operand::Literal(v),
                Err(_) => return Err(self.unexpected(&["literal", "identifier"])),
            }
        };
        Ok(Comparison { attr, op, rhs })
    }
}
