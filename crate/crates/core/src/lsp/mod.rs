//! A standalone hover server: resolves the call under the cursor to a
//! database record and answers with its rendered safety document.

mod resolve;
mod server;

use serde::{Deserialize, Serialize};

use crate::docstore::{render_doc, ApiIdentifier, DocDatabase};
use crate::taxonomy::PropertyCatalog;
pub use resolve::{byte_offset, call_site, imports, position_of, resolve_site, CallSite};
pub use server::{read_message, serve, write_message, FramingError};

/// Zero-based line and UTF-16 code-unit column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub line: u32,
    pub character: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub start: Position,
    pub end: Position,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentState {
    pub uri: String,
    pub text: String,
    pub version: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Confidence {
    High,
    Medium,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    PathMatch,
    ReceiverHint,
    UniqueName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolutionCandidate {
    pub identifier: ApiIdentifier,
    pub confidence: Confidence,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("position {}:{} is outside the document", .0.line, .0.character)]
pub struct OutOfBounds(pub Position);

/// Candidates for the token at `position`, best first. Empty when the
/// token names nothing in the database.
pub fn resolve_call_at(text: &str, position: Position, db: &DocDatabase) -> Result<Vec<ResolutionCandidate>, OutOfBounds> {
    let offset = byte_offset(text, position).ok_or(OutOfBounds(position))?;
    Ok(call_site(text, offset).map(|site| resolve_site(&site, db)).unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hover {
    pub contents: String,
    pub range: Range,
}

/// Hover text: the top candidate's document, preceded by the full candidate
/// list when the match is ambiguous, and followed by a citation line.
pub fn hover(db: &DocDatabase, catalog: &PropertyCatalog, doc: &DocumentState, position: Position) -> Result<Option<Hover>, OutOfBounds> {
    let offset = byte_offset(&doc.text, position).ok_or(OutOfBounds(position))?;
    let Some(site) = call_site(&doc.text, offset) else { return Ok(None) };
    let found = resolve_site(&site, db);
    let Some(top) = found.first() else { return Ok(None) };
    let record = db.lookup(top.identifier.as_str()).expect("candidates come from the database");
    let mut contents = String::new();
    if found.len() > 1 {
        contents.push_str(&format!("{} candidates for `{}`:\n", found.len(), site.name));
        for c in &found {
            contents.push_str(&format!("- {}\n", c.identifier));
        }
        contents.push('\n');
    }
    contents.push_str(&render_doc(record, catalog));
    contents.push_str(&format!("\nReference: {}\n", record.identifier));
    let range = Range { start: position_of(&doc.text, site.start), end: position_of(&doc.text, site.end) };
    Ok(Some(Hover { contents, range }))
}
