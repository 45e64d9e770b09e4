//! `.frep` model files: a small declarative language compiled to a
//! [`ScalarField`](crate::geom::ScalarField) and its [`ParamSet`](crate::geom::ParamSet).
//!
//! ```text
//! # the hole radius is a parameter
//! param r = 0.5 in [0.1, 0.7];
//! let body = intersection(sphere(r=1), block(vertex=(-0.75,-0.75,-0.75), dx=1.5, dy=1.5, dz=1.5));
//! output difference(body, cylZ(r=r));
//! ```
//!
//! Errors render as `file:line:col: message`.

mod ast;
mod builtins;
mod compile;
mod lexer;
mod parser;

use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use ast::{Arg, BinOp, Expr, ExprKind, Ident, Item, LetDecl, ParamDecl, Program};
pub use builtins::{lookup, ArgKind, ArgSpec, Builtin, Value, BUILTINS};
pub use compile::{compile, Model};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

/// Byte range plus the 1-based line and column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl SourceSpan {
    /// From the start of `self` to the end of `other`.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        SourceSpan { end: other.end.max(self.start), ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Lex,
    Parse,
    Compile,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScriptError {
    pub stage: Stage,
    pub span: SourceSpan,
    pub message: String,
    /// Tokens the parser would have accepted.
    pub expected: Vec<String>,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.col, self.message)
    }
}

impl ScriptError {
    pub(crate) fn lex(span: SourceSpan, message: String) -> Self {
        ScriptError { stage: Stage::Lex, span, message, expected: Vec::new() }
    }

    pub(crate) fn parse(span: SourceSpan, expected: Vec<String>, found: String) -> Self {
        let message = format!("expected {}, found {found}", expected.join(" or "));
        ScriptError { stage: Stage::Parse, span, message, expected }
    }

    pub(crate) fn compile(span: SourceSpan, message: String) -> Self {
        ScriptError { stage: Stage::Compile, span, message, expected: Vec::new() }
    }

    /// `file:line:col: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

pub fn parse_source(src: &str) -> Result<Program, ScriptError> {
    parse(&tokenize(src)?)
}

pub fn compile_source(src: &str) -> Result<Model, ScriptError> {
    compile(&parse_source(src)?)
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{}", .error.render(.path))]
    Script { path: String, error: ScriptError },
}

/// Reads and compiles a model file.
pub fn load_file(path: impl AsRef<Path>) -> Result<Model, LoadError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: shown.clone(), source })?;
    compile_source(&src).map_err(|error| LoadError::Script { path: shown, error })
}

/// Markdown table of every builtin signature.
pub fn builtin_reference() -> String {
    let mut s = String::from("| builtin | description |\n|---|---|\n");
    for b in BUILTINS {
        s.push_str(&format!("| `{b}` | {} |\n", b.doc.replace('|', "\\|")));
    }
    s
}
