use std::fmt;

use serde::Serialize;

/// A single invariant violation reported by one of the validators or linters.
///
/// `rule` is a stable, human-readable name of the violated invariant (for
/// example `"category count mismatch"`); `subject` names the offending id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub rule: &'static str,
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(rule: &'static str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            rule,
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.rule, self.subject, self.message)
    }
}

/// Line/column position (1-based) inside a source document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    /// Converts a byte offset into a line/column pair. Offsets past the end
    /// clamp to the last position.
    pub fn from_offset(source: &str, offset: usize) -> Self {
        let offset = offset.min(source.len());
        let before = &source.as_bytes()[..offset];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        let column = String::from_utf8_lossy(&before[line_start..]).chars().count() + 1;
        Self { line, column }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

/// Where an error was found: either a precise position or a structural path
/// such as `cve[3]` when the document format carries no spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Site {
    At(Location),
    Path(String),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::At(loc) => loc.fmt(f),
            Site::Path(p) => f.write_str(p),
        }
    }
}

impl Site {
    pub(crate) fn of_span(source: &str, span: std::ops::Range<usize>) -> Self {
        Site::At(Location::from_offset(source, span.start))
    }
}
