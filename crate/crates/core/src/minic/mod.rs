//! MiniC front-end: lexer, recursive-descent parser, canonical printer and a
//! reference interpreter that serves as the semantic-equivalence oracle.
//!
//! MiniC is a single-function C subset: `int` scalars, fixed-size `int`
//! arrays, structured control flow (`if`, `while`, `for`, `switch`, `break`,
//! `return`) and calls. `read_int()` and `print_int(x)` are the only I/O.

mod ast;
mod check;
pub mod gen;
mod interp;
mod lexer;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::*;
pub use check::{is_intrinsic, PRINT_INT, READ_INT};
pub use interp::{interpret, ExecStatus, ExecTrace, TrapKind, DEFAULT_STEP_LIMIT};
pub use lexer::{tokenize, Keyword, Punct, Token, TokenKind};
pub use parser::parse_function;
pub use printer::{expr_to_string, lvalue_to_string, pretty_print, simple_to_string};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("lex error at {span}: {message}")]
    Lex { message: String, span: SourceSpan },
    #[error("parse error at {span}: expected {expected}, found {found}")]
    Parse {
        expected: String,
        found: String,
        span: SourceSpan,
    },
    #[error("scope error at {span}: {message}")]
    Scope { message: String, span: SourceSpan },
}

/// Tokenizes and parses one function.
pub fn parse(source: &str) -> Result<Function, FrontendError> {
    parse_function(&tokenize(source)?)
}

/// Pretty-prints and re-parses, giving every node a span in the canonical text.
pub fn reparse(f: &Function) -> Result<Function, FrontendError> {
    parse(&pretty_print(f))
}
