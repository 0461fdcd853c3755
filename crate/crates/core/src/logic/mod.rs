//! Quantifier-free integer/boolean formulas and guarded statements.

mod eval;
mod parse;
mod stmt;
mod term;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval, eval_bool, Compiled};
pub use parse::{parse_formula, parse_term};
pub use stmt::{check_hoare, wp, HoareResult, Statement, POST_SUFFIX};
pub use term::{Kind, Op, Sort, Term};

/// Variable declarations: name to sort, in name order.
pub type Decls = BTreeMap<String, Sort>;

/// A value of either sort.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn sort(self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Bool(_) => Sort::Bool,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            Value::Int(_) => None,
        }
    }

    /// The literal term denoting this value.
    pub fn to_term(self) -> Term {
        match self {
            Value::Int(v) => Term::int(v),
            Value::Bool(b) => Term::bool(b),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Total assignment of values to variables.
pub type Valuation = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("sort error at `{symbol}`: {message}")]
    Sort { symbol: String, message: String },
    #[error("undeclared symbol `{name}` at byte {pos}")]
    Undeclared { name: String, pos: usize },
    #[error("variable `{0}` has no value")]
    Unbound(String),
    #[error("division by zero")]
    DivByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("invalid variable name `{0}`")]
    ReservedName(String),
    #[error("statement error: {0}")]
    Statement(String),
}

/// Names containing `!` are reserved for encodings (primed copies, havoc
/// witnesses); program and ghost names must avoid them.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$'))
        && !matches!(name, "true" | "false" | "_")
        && parse::operator(name).is_none()
        && !parse::is_reserved(name)
}
