use std::collections::BTreeMap;

use super::{load_database, DbError, DocDatabase};
use crate::diagnostic::{Diagnostic, Location};
use crate::taxonomy::PropertyCatalog;

const LINK_MARKERS: [&str; 4] = ["http://", "https://", "](", "<a href"];

/// Revision-goal lint over a loaded database.
pub fn lint_database(db: &DocDatabase, catalog: &PropertyCatalog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for record in db.iter() {
        let id = record.identifier.as_str();
        for t in &record.triplets {
            for (i, slice) in t.slices.iter().enumerate() {
                let lower = slice.to_ascii_lowercase();
                if let Some(marker) = LINK_MARKERS.iter().find(|m| lower.contains(*m)) {
                    out.push(Diagnostic::new(
                        "G9 hyperlink in slice",
                        id,
                        format!("{}.{} slice {i} contains `{marker}`", t.subject, t.property),
                    ));
                }
            }
        }
        let keys: Vec<_> = record.triplets.iter().map(|t| record.triplet_key(t, catalog)).collect();
        if let Some(i) = keys.windows(2).position(|w| w[0] > w[1]) {
            let (a, b) = (&record.triplets[i], &record.triplets[i + 1]);
            out.push(Diagnostic::new(
                "G12 triplet order",
                id,
                format!("{}.{} is listed before {}.{}", a.subject, a.property, b.subject, b.property),
            ));
        }
        if record.meta.corner_case.is_none() && record.triplets.is_empty() {
            out.push(Diagnostic::new("missing safety coverage", id, "record has no triplets and no corner case"));
        }
    }
    out
}

/// Lints raw database source. Duplicate identifiers can only be seen here,
/// since loading rejects them; a source that fails to load for any other
/// reason yields a single load diagnostic.
pub fn lint_source(source: &str, catalog: &PropertyCatalog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut first: BTreeMap<String, Location> = BTreeMap::new();
    for (id, loc) in api_table_headers(source) {
        match first.get(&id) {
            Some(prev) => out.push(Diagnostic::new(
                "G8 duplicate identifier",
                &id,
                format!("{loc} repeats the table at {prev}"),
            )),
            None => {
                first.insert(id, loc);
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    match load_database(source, catalog) {
        Ok(db) => lint_database(&db, catalog),
        Err(e @ DbError::DuplicateIdentifier { .. }) => vec![Diagnostic::new("G8 duplicate identifier", "", e.to_string())],
        Err(e) => vec![Diagnostic::new("load error", "", e.to_string())],
    }
}

/// Identifiers of `[api."<id>"]` table headers with their positions.
pub(crate) fn api_table_headers(source: &str) -> Vec<(String, Location)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in source.split_inclusive('\n') {
        let indent = line.len() - line.trim_start().len();
        if let Some(id) = line.trim_start().strip_prefix("[api.").and_then(header_key) {
            out.push((id, Location::from_offset(source, offset + indent)));
        }
        offset += line.len();
    }
    out
}

fn header_key(rest: &str) -> Option<String> {
    let rest = rest.trim_start();
    let (key, tail) = match rest.chars().next()? {
        q @ ('"' | '\'') => {
            let end = rest[1..].find(q)? + 1;
            (&rest[1..end], &rest[end + 1..])
        }
        _ => {
            let end = rest.find(|c: char| c == ']' || c == '.' || c.is_whitespace())?;
            (&rest[..end], &rest[end..])
        }
    };
    tail.trim_start().starts_with(']').then(|| key.to_string())
}
