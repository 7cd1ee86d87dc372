//! The `.irvo` text format and the `irvo-json/1` projection.
//!
//! ```text
//! model "desk" {
//!   place desk1
//!   user alice @desk1
//!   tool pen real @desk1 mobility alice/free
//!   object paper real @desk1
//!   rel alice.KH -> pen action
//!   rel pen -> paper action channel KH
//!   rel paper -> alice.V perception
//!   rel pen -> alice.V perception
//! }
//! ```
//!
//! [`parse`] is the only way text becomes a [`Model`]; [`serialize`] writes
//! the canonical form back, and `parse(serialize(m)) == m` for every model.

mod json;
mod lexer;
mod parser;
mod print;

use std::fmt;

use crate::model::Model;

pub use json::{from_json, to_json, JsonError, JSON_SCHEMA};
pub use print::serialize;

/// Location of a diagnostic, 1-based, counted in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    /// Smallest single-line span covering both, or `self` when they sit on
    /// different lines.
    pub(crate) fn to(self, end: SourceSpan) -> SourceSpan {
        if end.line == self.line && end.column >= self.column {
            SourceSpan { length: end.column + end.length - self.column, ..self }
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub span: SourceSpan,
    /// Stable code: `E-...` for errors, `W-...` for warnings.
    pub code: String,
    pub message: String,
}

impl ParseDiagnostic {
    pub(crate) fn error(span: SourceSpan, code: &str, message: impl Into<String>) -> Self {
        ParseDiagnostic { span, code: code.to_string(), message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.code.starts_with("E-")
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = if self.is_error() { "error" } else { "warning" };
        write!(f, "{}:{}: {level}[{}]: {}", self.span.line, self.span.column, self.code, self.message)
    }
}

/// A successfully parsed model plus any warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub model: Model,
    pub warnings: Vec<ParseDiagnostic>,
}

/// Parses `.irvo` text, keeping warnings.
pub fn parse_with_warnings(text: &str) -> Result<Parsed, Vec<ParseDiagnostic>> {
    parser::parse(text)
}

/// Parses `.irvo` text into a model, or returns the error diagnostics.
pub fn parse(text: &str) -> Result<Model, Vec<ParseDiagnostic>> {
    parse_with_warnings(text).map(|p| p.model)
}
