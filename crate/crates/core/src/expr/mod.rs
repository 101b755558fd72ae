//! Single-variable expressions evaluated together with their derivatives.

mod ast;
mod eval;
pub mod jet;
mod parse;

pub use ast::{BinaryOp, Expr, ExprKind, Span, UnaryOp};
pub use eval::{eval_jet, eval_series, eval_value, EvalError};
pub use jet::{Jet, Jet4};
pub use parse::{parse_expression, parse_expression_in, ParseError, ParseErrorKind};
