//! The supported Python subset: tokenizer, parser, canonical printer and
//! symbol resolution.

pub mod lexer;
pub mod parser;
pub mod printer;
pub mod symbols;
pub mod tree;

use thiserror::Error;

pub use parser::parse;
pub use printer::{emit, print_function, print_unit, Emitted, PrintToken};
pub use symbols::{
    in_scope_before, resolve_symbols, FunctionScope, Scope, Symbol, SymbolError, SymbolId, SymbolKind, SymbolTable,
};
pub use tree::{node_at, replace_at, LocationError, NodeKind, ReplaceError, Span, SyntaxTree, TreeLocation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unsupported construct at line {line}, column {col}: {construct}")]
    Unsupported { line: usize, col: usize, construct: String },
}

impl ParseError {
    pub fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax { line, col, message: message.into() }
    }

    pub fn unsupported(line: usize, col: usize, construct: impl Into<String>) -> Self {
        ParseError::Unsupported { line, col, construct: construct.into() }
    }

    pub fn is_unsupported(&self) -> bool {
        matches!(self, ParseError::Unsupported { .. })
    }

    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. } | ParseError::Unsupported { line, col, .. } => (*line, *col),
        }
    }
}

/// A parsed source file: its text and the function definitions it contains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub text: String,
    pub functions: Vec<SyntaxTree>,
}

impl SourceUnit {
    /// 1-based line and column of a byte offset in `text`.
    pub fn line_col(&self, offset: usize) -> (usize, usize) {
        line_col(&self.text, offset)
    }
}

pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}
