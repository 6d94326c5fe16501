// SPDX-License-Identifier: Apache-2.0

//! A single-table SQL subset evaluated over record batches.
//!
//! ```text
//! query      := SELECT projection FROM ident [WHERE ident cmp literal]
//! projection := '*' | ident (',' ident)*
//! cmp        := '=' | '!=' | '<' | '<=' | '>' | '>='
//! literal    := integer | decimal | 'string'       ('' escapes a quote)
//! ```
//!
//! Keywords are case-insensitive and reserved. Comparisons against a null
//! cell are false. Integer literals only compare with Int32/Int64 columns,
//! decimals only with Float64, strings only with Utf8 (byte-wise).

mod exec;
mod parser;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use exec::{bind, execute_query, BoundQuery};
pub use parser::parse_query;

use crate::columnar::DataType;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at byte {position}: expected {}, found {found}", .expected.join(" or "))]
    Syntax { position: usize, expected: Vec<&'static str>, found: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` projected twice")]
    DuplicateColumn(String),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("cannot compare {column_type} column `{column}` with {literal} literal")]
    TypeMismatch { column: String, column_type: DataType, literal: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub projection: Projection,
    pub source: String,
    pub predicate: Option<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    All,
    Columns(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub column: String,
    pub op: CmpOp,
    pub literal: Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
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

    /// IEEE semantics for floats: every comparison with NaN is false except `!=`.
    #[inline]
    pub fn eval<T: PartialOrd + ?Sized>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Integer(i64),
    Decimal(f64),
    Str(String),
}

impl Literal {
    pub fn kind(&self) -> &'static str {
        match self {
            Literal::Integer(_) => "integer",
            Literal::Decimal(_) => "decimal",
            Literal::Str(_) => "string",
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Integer(v) => write!(f, "{v}"),
            Literal::Decimal(v) => {
                let s = alloc::format!("{v}");
                if v.is_finite() && !s.contains('.') {
                    write!(f, "{s}.0")
                } else {
                    f.write_str(&s)
                }
            }
            Literal::Str(s) => {
                f.write_str("'")?;
                for part in s.split('\'').enumerate() {
                    if part.0 > 0 {
                        f.write_str("''")?;
                    }
                    f.write_str(part.1)?;
                }
                f.write_str("'")
            }
        }
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.projection {
            Projection::All => f.write_str("*")?,
            Projection::Columns(cols) => f.write_str(&cols.join(", "))?,
        }
        write!(f, " FROM {}", self.source)?;
        if let Some(p) = &self.predicate {
            write!(f, " WHERE {} {} {}", p.column, p.op.symbol(), p.literal)?;
        }
        Ok(())
    }
}
