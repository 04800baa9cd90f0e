use std::fmt::Write;

use super::{ApiRecord, SafetyTriplet};
use crate::taxonomy::{Category, PropertyCatalog};

/// Renders the structured safety document of one record.
///
/// Blocks are ordered by category (precondition properties first), then
/// subject, then catalog position. Each block is a `subject: Property`
/// heading followed by its slices, one per line.
pub fn render_doc(record: &ApiRecord, catalog: &PropertyCatalog) -> String {
    let mut out = String::new();
    out.push_str("# SafetyProperty\n");
    let _ = writeln!(out, "# Identifier: {}", record.identifier);
    let _ = writeln!(out, "# Type: {}", record.impl_type);
    let _ = writeln!(out, "# Signature: {}", record.signature.raw);
    for t in ordered_blocks(record, catalog) {
        let _ = writeln!(out, "\n{}: {}", t.subject, catalog.display_label(&t.property));
        for slice in &t.slices {
            out.push_str(slice);
            out.push('\n');
        }
    }
    out
}

/// Triplets in rendering order.
pub(crate) fn ordered_blocks<'a>(record: &'a ApiRecord, catalog: &PropertyCatalog) -> Vec<&'a SafetyTriplet> {
    let mut blocks: Vec<&SafetyTriplet> = record.triplets.iter().collect();
    blocks.sort_by_key(|t| {
        let post = catalog.category_of(&t.property) == Some(Category::Post);
        (post, record.triplet_key(t, catalog))
    });
    blocks
}
