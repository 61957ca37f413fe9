use std::fmt;

use crate::value::{format_float, CmpOp};

use super::GqlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Select,
    From,
    Where,
    Order,
    By,
    Asc,
    Desc,
    Limit,
    Insert,
    Into,
    Values,
    Update,
    Set,
    Delete,
    And,
    Or,
    True,
    False,
    Null,
}

impl Keyword {
    fn lookup(word: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match word.to_ascii_uppercase().as_str() {
            "SELECT" => Select,
            "FROM" => From,
            "WHERE" => Where,
            "ORDER" => Order,
            "BY" => By,
            "ASC" => Asc,
            "DESC" => Desc,
            "LIMIT" => Limit,
            "INSERT" => Insert,
            "INTO" => Into,
            "VALUES" => Values,
            "UPDATE" => Update,
            "SET" => Set,
            "DELETE" => Delete,
            "AND" => And,
            "OR" => Or,
            "TRUE" => True,
            "FALSE" => False,
            "NULL" => Null,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        use Keyword::*;
        match self {
            Select => "SELECT",
            From => "FROM",
            Where => "WHERE",
            Order => "ORDER",
            By => "BY",
            Asc => "ASC",
            Desc => "DESC",
            Limit => "LIMIT",
            Insert => "INSERT",
            Into => "INTO",
            Values => "VALUES",
            Update => "UPDATE",
            Set => "SET",
            Delete => "DELETE",
            And => "AND",
            Or => "OR",
            True => "TRUE",
            False => "FALSE",
            Null => "NULL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Op(CmpOp),
    Star,
    Comma,
    LParen,
    RParen,
    Semicolon,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => f.write_str(k.as_str()),
            TokenKind::Ident(s) => write!(f, "identifier {s}"),
            TokenKind::Int(i) => write!(f, "integer {i}"),
            TokenKind::Float(x) => write!(f, "float {}", format_float(*x)),
            TokenKind::Str(s) => write!(f, "string '{s}'"),
            TokenKind::Op(op) => f.write_str(op.symbol()),
            TokenKind::Star => f.write_str("*"),
            TokenKind::Comma => f.write_str(","),
            TokenKind::LParen => f.write_str("("),
            TokenKind::RParen => f.write_str(")"),
            TokenKind::Semicolon => f.write_str(";"),
        }
    }
}

/// A token with the byte offset where it starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, GqlError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'*' => Some(TokenKind::Star),
            b',' => Some(TokenKind::Comma),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            b';' => Some(TokenKind::Semicolon),
            b'=' => Some(TokenKind::Op(CmpOp::Eq)),
            _ => None,
        };
        if let Some(kind) = simple {
            tokens.push(Token { kind, pos: start });
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let kind = match c {
            b'!' if next == Some(b'=') => {
                i += 2;
                TokenKind::Op(CmpOp::Ne)
            }
            b'<' if next == Some(b'=') => {
                i += 2;
                TokenKind::Op(CmpOp::Le)
            }
            b'<' if next == Some(b'>') => {
                i += 2;
                TokenKind::Op(CmpOp::Ne)
            }
            b'<' => {
                i += 1;
                TokenKind::Op(CmpOp::Lt)
            }
            b'>' if next == Some(b'=') => {
                i += 2;
                TokenKind::Op(CmpOp::Ge)
            }
            b'>' => {
                i += 1;
                TokenKind::Op(CmpOp::Gt)
            }
            b'\'' => {
                let (s, end) = lex_string(text, i)?;
                i = end;
                TokenKind::Str(s)
            }
            b'0'..=b'9' => {
                let (kind, end) = lex_number(text, i)?;
                i = end;
                kind
            }
            b'-' if next.is_some_and(|n| n.is_ascii_digit()) => {
                let (kind, end) = lex_number(text, i)?;
                i = end;
                kind
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                match Keyword::lookup(word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word.to_string()),
                }
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(GqlError::Lex { position: start, ch });
            }
        };
        tokens.push(Token { kind, pos: start });
    }
    Ok(tokens)
}

fn lex_string(text: &str, start: usize) -> Result<(String, usize), GqlError> {
    let mut out = String::new();
    let mut chars = text[start + 1..].char_indices().peekable();
    while let Some((off, ch)) = chars.next() {
        if ch == '\'' {
            if matches!(chars.peek(), Some((_, '\''))) {
                chars.next();
                out.push('\'');
                continue;
            }
            return Ok((out, start + 1 + off + 1));
        }
        out.push(ch);
    }
    Err(GqlError::Lex { position: start, ch: '\'' })
}

fn lex_number(text: &str, start: usize) -> Result<(TokenKind, usize), GqlError> {
    let bytes = text.as_bytes();
    let mut i = start;
    if bytes[i] == b'-' {
        i += 1;
    }
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut is_float = false;
    if i < bytes.len() && bytes[i] == b'.' {
        is_float = true;
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == frac_start {
            return Err(GqlError::Lex { position: i - 1, ch: '.' });
        }
    }
    let lexeme = &text[start..i];
    let kind = if is_float {
        TokenKind::Float(lexeme.parse().map_err(|_| GqlError::Lex { position: start, ch: bytes[start] as char })?)
    } else {
        TokenKind::Int(lexeme.parse().map_err(|_| GqlError::Lex { position: start, ch: bytes[start] as char })?)
    };
    Ok((kind, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn select_tokens() {
        assert_eq!(
            kinds("SELECT name FROM Employee"),
            vec![
                TokenKind::Keyword(Keyword::Select),
                TokenKind::Ident("name".into()),
                TokenKind::Keyword(Keyword::From),
                TokenKind::Ident("Employee".into()),
            ]
        );
    }

    #[test]
    fn comparison_with_float() {
        assert_eq!(
            kinds("WHERE salary >= 50000.0"),
            vec![
                TokenKind::Keyword(Keyword::Where),
                TokenKind::Ident("salary".into()),
                TokenKind::Op(CmpOp::Ge),
                TokenKind::Float(50000.0),
            ]
        );
    }

    #[test]
    fn illegal_character() {
        assert_eq!(tokenize("SELECT @"), Err(GqlError::Lex { position: 7, ch: '@' }));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert_eq!(kinds("sElEcT")[0], TokenKind::Keyword(Keyword::Select));
    }

    #[test]
    fn string_escape_and_unterminated() {
        assert_eq!(kinds("'O''Hara'"), vec![TokenKind::Str("O'Hara".into())]);
        assert_eq!(kinds("'R&D'"), vec![TokenKind::Str("R&D".into())]);
        assert!(matches!(tokenize("'open"), Err(GqlError::Lex { position: 0, .. })));
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("7 -3 2.5"), vec![TokenKind::Int(7), TokenKind::Int(-3), TokenKind::Float(2.5)]);
        assert!(tokenize("99999999999999999999").is_err());
        assert_eq!(kinds("a<>b")[1], TokenKind::Op(CmpOp::Ne));
    }
}
