// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{CmpOp, Literal, Predicate, Projection, QueryAst, QueryError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Select,
    From,
    Where,
    Ident(String),
    Star,
    Comma,
    Cmp(CmpOp),
    Lit(Literal),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Select => "SELECT".into(),
            Tok::From => "FROM".into(),
            Tok::Where => "WHERE".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Star => "`*`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Lit(l) => format!("literal {l}"),
            Tok::End => "end of input".into(),
        }
    }
}

fn syntax(position: usize, expected: &[&'static str], found: impl ToString) -> QueryError {
    QueryError::Syntax { position, expected: expected.to_vec(), found: found.to_string() }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'*' => {
                i += 1;
                Tok::Star
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'=' => {
                i += 1;
                Tok::Cmp(CmpOp::Eq)
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                Tok::Cmp(CmpOp::Ne)
            }
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                i += 1 + eq as usize;
                Tok::Cmp(match (c, eq) {
                    (b'<', false) => CmpOp::Lt,
                    (b'<', true) => CmpOp::Le,
                    (_, false) => CmpOp::Gt,
                    (_, true) => CmpOp::Ge,
                })
            }
            b'\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    let rest = &text[i..];
                    let Some(q) = rest.find('\'') else {
                        return Err(syntax(start, &["closing quote"], "end of input"));
                    };
                    s.push_str(&rest[..q]);
                    i += q + 1;
                    if bytes.get(i) == Some(&b'\'') {
                        s.push('\'');
                        i += 1;
                    } else {
                        break;
                    }
                }
                Tok::Lit(Literal::Str(s))
            }
            b'-' | b'0'..=b'9' => {
                if c == b'-' {
                    i += 1;
                }
                let digits = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i == digits {
                    return Err(syntax(i, &["digit"], found_at(text, i)));
                }
                let mut decimal = false;
                if bytes.get(i) == Some(&b'.') {
                    i += 1;
                    let frac = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac {
                        return Err(syntax(i, &["digit"], found_at(text, i)));
                    }
                    decimal = true;
                }
                if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_' || bytes[i] == b'.') {
                    return Err(syntax(i, &["end of number"], found_at(text, i)));
                }
                let s = &text[start..i];
                Tok::Lit(if decimal {
                    Literal::Decimal(s.parse().map_err(|_| syntax(start, &["decimal"], s))?)
                } else {
                    Literal::Integer(s.parse().map_err(|_| syntax(start, &["64-bit integer"], s))?)
                })
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                if word.eq_ignore_ascii_case("select") {
                    Tok::Select
                } else if word.eq_ignore_ascii_case("from") {
                    Tok::From
                } else if word.eq_ignore_ascii_case("where") {
                    Tok::Where
                } else {
                    Tok::Ident(word.into())
                }
            }
            _ => return Err(syntax(start, &["token"], found_at(text, start))),
        };
        out.push((start, tok));
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

fn found_at(text: &str, i: usize) -> String {
    match text.get(i..).and_then(|s| s.chars().next()) {
        Some(c) => format!("`{c}`"),
        None => "end of input".into(),
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &(usize, Tok) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail(&self, expected: &[&'static str]) -> QueryError {
        let (at, tok) = self.peek();
        syntax(*at, expected, tok.describe())
    }

    fn keyword(&mut self, kw: Tok, name: &'static str) -> Result<(), QueryError> {
        if self.peek().1 == kw {
            self.bump();
            Ok(())
        } else {
            Err(self.fail(&[name]))
        }
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match self.peek().1.clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.fail(&["identifier"])),
        }
    }

    fn query(&mut self) -> Result<QueryAst, QueryError> {
        self.keyword(Tok::Select, "SELECT")?;
        let projection = match self.peek().1 {
            Tok::Star => {
                self.bump();
                Projection::All
            }
            Tok::Ident(_) => {
                let mut cols = vec![self.ident()?];
                while self.peek().1 == Tok::Comma {
                    self.bump();
                    cols.push(self.ident()?);
                }
                Projection::Columns(cols)
            }
            _ => return Err(self.fail(&["`*`", "identifier"])),
        };
        if self.peek().1 != Tok::From {
            let expected: &[&'static str] =
                if matches!(projection, Projection::Columns(_)) { &["`,`", "FROM"] } else { &["FROM"] };
            return Err(self.fail(expected));
        }
        self.bump();
        let source = self.ident()?;
        let predicate = match self.peek().1 {
            Tok::Where => {
                self.bump();
                let column = self.ident()?;
                let op = match self.peek().1 {
                    Tok::Cmp(op) => {
                        self.bump();
                        op
                    }
                    _ => return Err(self.fail(&["comparison operator"])),
                };
                let literal = match self.peek().1.clone() {
                    Tok::Lit(l) => {
                        self.bump();
                        l
                    }
                    _ => return Err(self.fail(&["literal"])),
                };
                Some(Predicate { column, op, literal })
            }
            Tok::End => None,
            _ => return Err(self.fail(&["WHERE", "end of input"])),
        };
        if self.peek().1 != Tok::End {
            return Err(self.fail(&["end of input"]));
        }
        Ok(QueryAst { projection, source, predicate })
    }
}

pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    Parser { toks: lex(text)?, pos: 0 }.query()
}
