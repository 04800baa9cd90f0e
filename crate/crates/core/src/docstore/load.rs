use std::collections::BTreeMap;

use serde::Deserialize;

use super::lint::api_table_headers;
use super::{
    parse_signature, ApiIdentifier, ApiMeta, ApiRecord, DocDatabase, IdentifierError,
    SafetyTriplet, SignatureError, Subject,
};
use crate::diagnostic::Location;
use crate::taxonomy::PropertyCatalog;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DbError {
    #[error("malformed database: {0}")]
    Malformed(String),
    #[error("{location}: duplicate identifier `{id}`")]
    DuplicateIdentifier { id: String, location: Location },
    #[error(transparent)]
    InvalidIdentifier(#[from] IdentifierError),
    #[error("{id}: bad signature: {source}")]
    Signature { id: String, source: SignatureError },
    #[error("{id}: unknown property `{property}`")]
    UnknownProperty { id: String, property: String },
    #[error("{id}: subject `{subject}` does not resolve against `{signature}`")]
    UnresolvedSubject { id: String, subject: String, signature: String },
    #[error("{id}: {subject}.{property} has no slices")]
    EmptySlices { id: String, subject: String, property: String },
    #[error("{id}: {subject}.{property} slice {index} is empty")]
    EmptySlice { id: String, subject: String, property: String, index: usize },
    #[error("{id}: unsafe_flag is false but no corner_case is given")]
    SafeWithoutCornerCase { id: String },
    #[error("{id}: {detail}")]
    Record { id: String, detail: String },
    #[error("database targets catalog version `{found}`, loaded catalog is `{expected}`")]
    CatalogVersion { expected: String, found: String },
}

/// A record before validation, common to both input formats.
struct Draft {
    id: String,
    impl_type: String,
    signature: String,
    meta: ApiMeta,
    triplets: Vec<(String, String, Vec<String>)>,
}

/// Loads and validates a database from its TOML source format, or from the
/// canonical JSON produced by [`export_canonical`](super::export_canonical).
pub fn load_database(source: &str, catalog: &PropertyCatalog) -> Result<DocDatabase, DbError> {
    let (version, drafts) = if source.trim_start().starts_with('{') {
        parse_json(source)?
    } else {
        parse_toml(source)?
    };
    if !version.is_empty() && !catalog.version.is_empty() && version != catalog.version {
        return Err(DbError::CatalogVersion { expected: catalog.version.clone(), found: version });
    }
    let mut records = BTreeMap::new();
    for draft in drafts {
        let record = finish(draft, catalog)?;
        if records.contains_key(&record.identifier) {
            return Err(DbError::DuplicateIdentifier {
                id: record.identifier.to_string(),
                location: Location { line: 0, column: 0 },
            });
        }
        records.insert(record.identifier.clone(), record);
    }
    Ok(DocDatabase { records, catalog_version: if version.is_empty() { catalog.version.clone() } else { version } })
}

fn finish(draft: Draft, catalog: &PropertyCatalog) -> Result<ApiRecord, DbError> {
    let identifier = ApiIdentifier::new(draft.id.clone())?;
    let id = draft.id;
    let signature = parse_signature(&draft.signature).map_err(|source| DbError::Signature { id: id.clone(), source })?;
    if !draft.meta.unsafe_flag && draft.meta.corner_case.is_none() {
        return Err(DbError::SafeWithoutCornerCase { id });
    }
    let mut triplets = Vec::with_capacity(draft.triplets.len());
    for (subject_token, property, slices) in draft.triplets {
        if !catalog.contains(&property) {
            return Err(DbError::UnknownProperty { id, property });
        }
        let subject = Subject::from_token(&subject_token);
        if subject.rank(&signature).is_none() {
            return Err(DbError::UnresolvedSubject { id, subject: subject_token, signature: draft.signature });
        }
        if slices.is_empty() {
            return Err(DbError::EmptySlices { id, subject: subject_token, property });
        }
        if let Some(index) = slices.iter().position(|s| s.trim().is_empty()) {
            return Err(DbError::EmptySlice { id, subject: subject_token, property, index });
        }
        if triplets.iter().any(|t: &SafetyTriplet| t.subject == subject && t.property == property) {
            return Err(DbError::Record { id, detail: format!("{subject_token}.{property} given twice") });
        }
        triplets.push(SafetyTriplet { subject, property, slices });
    }
    Ok(ApiRecord { identifier, impl_type: draft.impl_type, signature, triplets, meta: draft.meta })
}

fn parse_toml(source: &str) -> Result<(String, Vec<Draft>), DbError> {
    let mut seen = BTreeMap::new();
    for (id, location) in api_table_headers(source) {
        if seen.insert(id.clone(), location).is_some() {
            return Err(DbError::DuplicateIdentifier { id, location });
        }
    }
    let doc: toml::Table = toml::from_str(source).map_err(|e| DbError::Malformed(e.to_string()))?;
    let mut version = String::new();
    let mut drafts = Vec::new();
    for (key, value) in doc {
        match (key.as_str(), value) {
            ("catalog_version", toml::Value::String(s)) => version = s,
            ("api", toml::Value::Table(apis)) => {
                for (id, value) in apis {
                    let toml::Value::Table(table) = value else {
                        return Err(DbError::Record { id, detail: "record must be a table".into() });
                    };
                    drafts.push(toml_record(id, table)?);
                }
            }
            (other, _) => return Err(DbError::Malformed(format!("unexpected top-level key `{other}`"))),
        }
    }
    Ok((version, drafts))
}

fn toml_record(id: String, table: toml::Table) -> Result<Draft, DbError> {
    let bad = |id: &str, detail: String| DbError::Record { id: id.to_string(), detail };
    let mut impl_type = String::new();
    let mut signature = None;
    let mut meta = ApiMeta::default();
    let mut triplets = Vec::new();
    for (key, value) in table {
        match key.as_str() {
            "impl_type" => {
                impl_type = value.as_str().ok_or_else(|| bad(&id, "impl_type must be a string".into()))?.to_string()
            }
            "signature" => {
                signature = Some(value.as_str().ok_or_else(|| bad(&id, "signature must be a string".into()))?.to_string())
            }
            "meta" => meta = value.try_into().map_err(|e: toml::de::Error| bad(&id, format!("meta: {}", e.message())))?,
            "sp" => {
                let toml::Value::Table(subjects) = value else {
                    return Err(bad(&id, "sp must be a table of subjects".into()));
                };
                for (subject, props) in subjects {
                    let toml::Value::Table(props) = props else {
                        return Err(bad(&id, format!("sp.{subject} must be a table of properties")));
                    };
                    for (property, slices) in props {
                        let toml::Value::Array(items) = slices else {
                            return Err(bad(&id, format!("sp.{subject}.{property} must be an array of strings")));
                        };
                        let slices = items
                            .into_iter()
                            .map(|v| match v {
                                toml::Value::String(s) => Ok(s),
                                _ => Err(bad(&id, format!("sp.{subject}.{property} must contain only strings"))),
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        triplets.push((subject.clone(), property, slices));
                    }
                }
            }
            other => return Err(bad(&id, format!("unknown field `{other}`"))),
        }
    }
    let signature = signature.ok_or_else(|| bad(&id, "missing signature".into()))?;
    Ok(Draft { id, impl_type, signature, meta, triplets })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDb {
    catalog_version: String,
    records: BTreeMap<String, JsonRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    identifier: String,
    impl_type: String,
    signature: String,
    meta: ApiMeta,
    triplets: Vec<JsonTriplet>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonTriplet {
    subject: String,
    property: String,
    slices: Vec<String>,
}

fn parse_json(source: &str) -> Result<(String, Vec<Draft>), DbError> {
    let db: JsonDb = serde_json::from_str(source).map_err(|e| DbError::Malformed(e.to_string()))?;
    let mut drafts = Vec::with_capacity(db.records.len());
    for (key, r) in db.records {
        if key != r.identifier {
            return Err(DbError::Record { id: key, detail: format!("key does not match identifier `{}`", r.identifier) });
        }
        drafts.push(Draft {
            id: r.identifier,
            impl_type: r.impl_type,
            signature: r.signature,
            meta: r.meta,
            triplets: r.triplets.into_iter().map(|t| (t.subject, t.property, t.slices)).collect(),
        });
    }
    Ok((db.catalog_version, drafts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docstore::{seed_database, SEED_DATABASE};
    use crate::taxonomy::shipped_catalog;

    const HEAD: &str = "catalog_version = \"2024.1\"\n";

    fn load(body: &str) -> Result<DocDatabase, DbError> {
        load_database(&format!("{HEAD}{body}"), &shipped_catalog())
    }

    #[test]
    fn seed_has_pointer_read_record() {
        let cat = shipped_catalog();
        let db = load_database(SEED_DATABASE, &cat).unwrap();
        let read = db.lookup("primitive.pointer.html#method.read").unwrap();
        let subjects: Vec<&str> = read.triplets.iter().map(|t| t.subject.token()).collect();
        assert_eq!(subjects, ["self", "self", "self", "self", "retval"]);
        assert_eq!(read.impl_type, "*const T");
        assert_eq!(db, seed_database(&cat));
    }

    #[test]
    fn triplet_order_is_preserved() {
        let db = load(
            "[api.\"ptr/fn.read.html\"]\nsignature = \"fn read<T>(src: *const T) -> T\"\n\
             sp.retval.DualOwned = [\"a\"]\nsp.src.Layout = [\"b\"]\nsp.src.Allocated = [\"c\"]\n",
        )
        .unwrap();
        let r = db.lookup("ptr/fn.read.html").unwrap();
        let order: Vec<_> = r.triplets.iter().map(|t| (t.subject.token(), t.property.as_str())).collect();
        assert_eq!(order, [("retval", "DualOwned"), ("src", "Layout"), ("src", "Allocated")]);
    }

    #[test]
    fn unknown_property_is_named() {
        let err = load("[api.\"ptr/fn.read.html\"]\nsignature = \"fn read(self) -> T\"\nsp.self.Bogus = [\"x\"]\n").unwrap_err();
        assert_eq!(err, DbError::UnknownProperty { id: "ptr/fn.read.html".into(), property: "Bogus".into() });
        assert!(err.to_string().contains("Bogus"));
    }

    #[test]
    fn unresolvable_subject() {
        let err = load("[api.\"ptr/fn.read.html\"]\nsignature = \"fn read<T>(src: *const T) -> T\"\nsp.dst.Allocated = [\"x\"]\n")
            .unwrap_err();
        assert!(matches!(err, DbError::UnresolvedSubject { ref subject, .. } if subject == "dst"));
        let err = load("[api.\"ptr/fn.read.html\"]\nsignature = \"fn read<T>(src: *const T) -> T\"\nsp.self.Allocated = [\"x\"]\n")
            .unwrap_err();
        assert!(matches!(err, DbError::UnresolvedSubject { ref subject, .. } if subject == "self"));
    }

    #[test]
    fn duplicate_identifier_with_location() {
        let err = load(
            "[api.\"ptr/fn.read.html\"]\nsignature = \"fn read(self)\"\n\n[api.\"ptr/fn.read.html\"]\nsignature = \"fn read(self)\"\n",
        )
        .unwrap_err();
        assert_eq!(
            err,
            DbError::DuplicateIdentifier { id: "ptr/fn.read.html".into(), location: Location { line: 5, column: 1 } }
        );
    }

    #[test]
    fn empty_slice_array_and_empty_slice() {
        let err = load("[api.\"a.html\"]\nsignature = \"fn a(x: u8)\"\nsp.x.Bounded = []\n").unwrap_err();
        assert!(matches!(err, DbError::EmptySlices { .. }));
        let err = load("[api.\"a.html\"]\nsignature = \"fn a(x: u8)\"\nsp.x.Bounded = [\"ok\", \" \"]\n").unwrap_err();
        assert!(matches!(err, DbError::EmptySlice { index: 1, .. }));
    }

    #[test]
    fn other_record_errors() {
        assert!(matches!(load("[api.\"a\"]\nsignature = \"fn a()\"\n"), Err(DbError::InvalidIdentifier(_))));
        assert!(matches!(load("[api.\"a.html\"]\nsignature = \"fn a(*mut T)\"\n"), Err(DbError::Signature { .. })));
        assert!(matches!(load("[api.\"a.html\"]\nimpl_type = \"X\"\n"), Err(DbError::Record { .. })));
        assert!(matches!(load("[api.\"a.html\"]\nsignature = \"fn a()\"\ncolour = 1\n"), Err(DbError::Record { .. })));
        assert!(matches!(
            load("[api.\"a.html\"]\nsignature = \"fn a()\"\nmeta.unsafe_flag = false\n"),
            Err(DbError::SafeWithoutCornerCase { .. })
        ));
        assert!(load("[api.\"a.html\"]\nsignature = \"fn a()\"\nmeta.unsafe_flag = false\nmeta.corner_case = \"ffi-no-req\"\n").is_ok());
        assert!(matches!(load("[api.\"a.html\"]\nsignature = \"fn a()\"\nmeta.corner_case = \"weird\"\n"), Err(DbError::Record { .. })));
        assert!(matches!(load("stray = 1\n"), Err(DbError::Malformed(_))));
        assert!(matches!(load("[api.\"a.html\"\n"), Err(DbError::Malformed(_))));
    }

    #[test]
    fn catalog_version_must_match() {
        let err = load_database("catalog_version = \"1999\"\n", &shipped_catalog()).unwrap_err();
        assert!(matches!(err, DbError::CatalogVersion { .. }));
    }

    #[test]
    fn sub_property_triplets_are_accepted() {
        let db = load("[api.\"a.html\"]\nsignature = \"fn a(x: *mut u8)\"\nsp.x.Aligned = [\"aligned\"]\nsp.x.\"Initialized/Initialized\" = [\"init\"]\n").unwrap();
        assert_eq!(db.lookup("a.html").unwrap().triplets.len(), 2);
    }
}
