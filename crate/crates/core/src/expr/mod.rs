//! Lagrangian parsing, evaluation and exact higher-order differentiation.

mod ast;
mod jet;
mod parse;
pub mod taylor;

pub use ast::{ExpressionAst, FuncKind, Node, NodeKind};
pub use jet::{jet, Jet, MAX_JET_ORDER};
pub use parse::parse;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("empty source")]
    EmptySource,
    #[error("base dimension must be at least 2 (got {n})")]
    BaseDimension { n: usize },
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at byte {offset} out of range for n = {n}")]
    VariableOutOfRange {
        offset: usize,
        name: String,
        n: usize,
    },
    #[error("exponent at byte {offset} is not a constant")]
    NonConstantExponent { offset: usize },
    #[error("domain error at byte {offset}: {what}")]
    Domain { offset: usize, what: String },
    #[error("jet order {order} exceeds the supported maximum {max}")]
    JetOrder { order: usize, max: usize },
}
