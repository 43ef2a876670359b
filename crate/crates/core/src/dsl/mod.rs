//! Textual orchestration language.
//!
//! ```text
//! module Main(in AIn, out AOut) {
//!     emit AOut(true);
//!     await count(3, AIn.now);
//!     fork { run Solo(...); } par { every (Beat.now) { emit Tick(); } }
//! }
//! ```
//!
//! `run M(x as y)` binds the callee's interface signal `x` to the caller's
//! signal `y`; `run M(x = y)` is the same binding written the other way
//! round visually; `run M(...)` binds every interface signal by name.

mod lexer;
mod parser;
mod printer;

use thiserror::Error;

use crate::kernel::ast::Span;
use crate::kernel::{elaborate, ElabError, Program};

pub use parser::{parse_expr, parse_orchestration};
pub use printer::{print_expr, print_module, print_modules, print_stmt};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    SyntaxError { line: u32, col: u32, message: String },
    #[error("signal `{name}` declared twice ({span})")]
    DuplicateSignalDecl { name: String, span: Span },
    #[error("module `{name}` defined twice ({span})")]
    DuplicateModule { name: String, span: Span },
    #[error("unknown construct `{word}` at {span}")]
    UnknownConstruct { word: String, span: Span },
}

impl ParseError {
    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Self {
        ParseError::SyntaxError {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    /// Line and column of the offending construct.
    pub fn position(&self) -> (u32, u32) {
        match self {
            ParseError::SyntaxError { line, col, .. } => (*line, *col),
            ParseError::DuplicateSignalDecl { span, .. }
            | ParseError::DuplicateModule { span, .. }
            | ParseError::UnknownConstruct { span, .. } => (span.line, span.col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Elab(#[from] ElabError),
}

/// Parses `source` and elaborates module `entry` into a runnable program.
pub fn compile(source: &str, entry: &str) -> Result<Program, CompileError> {
    let modules = parse_orchestration(source)?;
    Ok(elaborate(&modules, entry)?)
}
