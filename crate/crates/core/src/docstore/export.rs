use serde_json::{json, Map, Value};

use super::{ApiRecord, DocDatabase};
use crate::taxonomy::PropertyCatalog;

/// Deterministic JSON export: identifiers sorted, triplets in canonical
/// subject/property order, object keys sorted, two-space indent, trailing LF.
pub fn export_canonical(db: &DocDatabase, catalog: &PropertyCatalog) -> Vec<u8> {
    let mut records = Map::new();
    for record in db.records.values() {
        records.insert(record.identifier.to_string(), record_json(record, catalog));
    }
    let doc = sorted(json!({ "catalog_version": db.catalog_version, "records": records }));
    let mut out = serde_json::to_vec_pretty(&doc).expect("JSON values always serialize");
    out.push(b'\n');
    out
}

/// One record in export form, canonicalized, keys sorted.
pub fn record_json(record: &ApiRecord, catalog: &PropertyCatalog) -> Value {
    let record = record.canonicalized(catalog);
    let triplets: Vec<Value> = record
        .triplets
        .iter()
        .map(|t| json!({ "subject": t.subject.token(), "property": t.property, "slices": t.slices }))
        .collect();
    sorted(json!({
        "identifier": record.identifier,
        "impl_type": record.impl_type,
        "signature": record.signature.raw,
        "meta": record.meta,
        "triplets": triplets,
    }))
}

/// Rebuilds every object with keys in byte order, whatever map
/// implementation serde_json was compiled with.
fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}
