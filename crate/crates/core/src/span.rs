use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A position range inside one source file, without the file itself.
///
/// AST nodes carry this compact form; [`SourceSpan`] attaches the file when
/// a location leaves the frontend (IR entities, warnings).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub line: u32,
    pub column: u32,
    pub end_line: u32,
    /// One past the last character.
    pub end_column: u32,
}

impl Span {
    pub fn new(line: u32, column: u32, end_line: u32, end_column: u32) -> Self {
        Span {
            line,
            column,
            end_line,
            end_column,
        }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: Span) -> Span {
        let (line, column) = (self.line, self.column).min((other.line, other.column));
        let (end_line, end_column) =
            (self.end_line, self.end_column).max((other.end_line, other.end_column));
        Span {
            line,
            column,
            end_line,
            end_column,
        }
    }
}

/// A file-qualified location. Lines and columns are 1-based; columns count
/// characters, not bytes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub end_line: u32,
    pub end_column: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, span: Span) -> Self {
        SourceSpan {
            file,
            line: span.line,
            column: span.column,
            end_line: span.end_line,
            end_column: span.end_column,
        }
    }

    pub fn span(&self) -> Span {
        Span::new(self.line, self.column, self.end_line, self.end_column)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}
