//! Tokenizer shared by the equation, formula and intervention grammars.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Quoted symbol, `'half'` or `"half"`.
    Str(String),
    Hash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    At,
    Assign,
    Comma,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Caret,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Int(n) => return write!(f, "`{n}`"),
            Tok::Str(s) => return write!(f, "'{s}'"),
            Tok::Hash => "#",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::At => "@",
            Tok::Assign => ":=",
            Tok::Comma => ",",
            Tok::Eq => "=",
            Tok::Neq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Caret => "^",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Arrow => "->",
            Tok::End => return f.write_str("end of input"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at position {position}: {message}")]
pub struct SyntaxError {
    /// Byte offset into the source text.
    pub position: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(position: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            position,
            message: message.into(),
        }
    }
}

pub fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = |a: u8, b: u8| c == a && bytes.get(i + 1) == Some(&b);
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i]
                .parse::<i64>()
                .map_err(|_| SyntaxError::new(start, "integer literal out of range"))?;
            out.push((Tok::Int(n), start));
            continue;
        } else if c == b'\'' || c == b'"' {
            let close = src[i + 1..]
                .find(c as char)
                .ok_or_else(|| SyntaxError::new(start, "unterminated quoted symbol"))?;
            let body = &src[i + 1..i + 1 + close];
            i += close + 2;
            out.push((Tok::Str(body.to_string()), start));
            continue;
        } else if two(b':', b'=') {
            i += 2;
            Tok::Assign
        } else if two(b'!', b'=') {
            i += 2;
            Tok::Neq
        } else if two(b'<', b'=') {
            i += 2;
            Tok::Le
        } else if two(b'>', b'=') {
            i += 2;
            Tok::Ge
        } else if two(b'&', b'&') {
            i += 2;
            Tok::AndAnd
        } else if two(b'|', b'|') {
            i += 2;
            Tok::OrOr
        } else if two(b'-', b'>') {
            i += 2;
            Tok::Arrow
        } else {
            i += 1;
            match c {
                b'#' => Tok::Hash,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'[' => Tok::LBracket,
                b']' => Tok::RBracket,
                b'@' => Tok::At,
                b',' => Tok::Comma,
                b'=' => Tok::Eq,
                b'<' => Tok::Lt,
                b'>' => Tok::Gt,
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'^' => Tok::Caret,
                b'!' => Tok::Bang,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or('?');
                    return Err(SyntaxError::new(start, format!("unexpected character {ch:?}")));
                }
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

/// Cursor over a token stream with the usual peek/expect helpers.
pub struct Cursor {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Cursor {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[idx].0
    }

    pub fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), SyntaxError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("{t}")))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub fn expect_end(&self) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        SyntaxError::new(self.offset(), format!("expected {wanted}, found {}", self.peek()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_intervention_and_lag_syntax() {
        let toks: Vec<Tok> = tokenize("[BT@0:=1] X(BS=1) && Z[-3] != #")
            .unwrap()
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        assert_eq!(
            toks,
            vec![
                Tok::LBracket,
                Tok::Ident("BT".into()),
                Tok::At,
                Tok::Int(0),
                Tok::Assign,
                Tok::Int(1),
                Tok::RBracket,
                Tok::Ident("X".into()),
                Tok::LParen,
                Tok::Ident("BS".into()),
                Tok::Eq,
                Tok::Int(1),
                Tok::RParen,
                Tok::AndAnd,
                Tok::Ident("Z".into()),
                Tok::LBracket,
                Tok::Minus,
                Tok::Int(3),
                Tok::RBracket,
                Tok::Neq,
                Tok::Hash,
                Tok::End,
            ]
        );
    }

    #[test]
    fn reports_offset_of_bad_character() {
        let err = tokenize("a = $").unwrap_err();
        assert_eq!(err.position, 4);
    }
}
