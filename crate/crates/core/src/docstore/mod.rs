//! The safety-property document database.
//!
//! Each unsafe API is one [`ApiRecord`] keyed by its rustdoc page path
//! ([`ApiIdentifier`]). Its requirements are stored as triplets of
//! (subject, property, slices): the subject is the receiver, a named
//! parameter or the return value; the property is a catalog id; the slices
//! are the sentences of safety prose bound to that pair.

mod export;
mod lint;
mod load;
mod render;
pub mod signature;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::taxonomy::PropertyCatalog;
pub use export::{export_canonical, record_json};
pub use lint::{lint_database, lint_source};
pub use load::{load_database, DbError};
pub use render::render_doc;
pub use signature::{parse_signature, ApiSignature, Param, Receiver, SignatureError, SignatureKind};

/// The document database bundled with the crate.
pub const SEED_DATABASE: &str = include_str!("../../data/seed_db.toml");

pub fn seed_database(catalog: &PropertyCatalog) -> DocDatabase {
    load_database(SEED_DATABASE, catalog).expect("bundled seed database is valid")
}

/// A rustdoc-style page path relative to the crate root, with an optional
/// `#fragment`, e.g. `primitive.pointer.html#method.read`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ApiIdentifier(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentifierError {
    #[error("identifier is empty")]
    Empty,
    #[error("identifier `{0}` does not name an .html page")]
    NotHtml(String),
    #[error("identifier `{0}` contains whitespace")]
    Whitespace(String),
}

impl ApiIdentifier {
    pub fn new(value: impl Into<String>) -> Result<Self, IdentifierError> {
        let value = value.into();
        if value.is_empty() {
            Err(IdentifierError::Empty)
        } else if value.chars().any(char::is_whitespace) {
            Err(IdentifierError::Whitespace(value))
        } else if !value.contains(".html") {
            Err(IdentifierError::NotHtml(value))
        } else {
            Ok(Self(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Path-like segments recovered from the page path: module directories,
    /// the item name, then the fragment's member name.
    ///
    /// `boxed/struct.Box.html#method.from_raw` gives `[boxed, Box, from_raw]`;
    /// `primitive.pointer.html#method.read-1` gives `[pointer, read]`.
    pub fn path_segments(&self) -> Vec<&str> {
        let (page, fragment) = match self.0.split_once('#') {
            Some((p, f)) => (p, Some(f)),
            None => (self.0.as_str(), None),
        };
        let mut segments: Vec<&str> = page.split('/').collect();
        let file = segments.pop().unwrap_or_default();
        let stem = file.strip_suffix(".html").unwrap_or(file);
        let item = stem.split_once('.').map_or(stem, |(_, name)| name);
        segments.push(item);
        if let Some(f) = fragment {
            let member = f.split_once('.').map_or(f, |(_, name)| name);
            let member = match member.rsplit_once('-') {
                Some((base, n)) if n.chars().all(|c| c.is_ascii_digit()) => base,
                _ => member,
            };
            segments.push(member);
        }
        segments
    }
}

impl fmt::Display for ApiIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for ApiIdentifier {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// The value a requirement binds to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subject {
    SelfValue,
    Param(String),
    ReturnValue,
}

impl Subject {
    /// `self`, `retval`, or a parameter name.
    pub fn from_token(token: &str) -> Self {
        match token {
            "self" => Subject::SelfValue,
            "retval" => Subject::ReturnValue,
            name => Subject::Param(name.to_string()),
        }
    }

    pub fn token(&self) -> &str {
        match self {
            Subject::SelfValue => "self",
            Subject::ReturnValue => "retval",
            Subject::Param(name) => name,
        }
    }

    /// Position in canonical order: receiver, parameters in signature order,
    /// return value. `None` when the subject does not resolve.
    pub fn rank(&self, sig: &ApiSignature) -> Option<usize> {
        match self {
            Subject::SelfValue => (sig.receiver != Receiver::None).then_some(0),
            Subject::Param(name) => sig.param(name).map(|(i, _)| i + 1),
            Subject::ReturnValue => Some(sig.params.len() + 1),
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyTriplet {
    pub subject: Subject,
    pub property: String,
    pub slices: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CornerCase {
    FfiNoReq,
    Compilation,
    NumericNoBound,
    Unexplained,
}

fn default_namespace() -> String {
    "core".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiMeta {
    #[serde(default = "default_namespace")]
    pub namespace: String,
    #[serde(default = "yes")]
    pub unsafe_flag: bool,
    #[serde(default)]
    pub intrinsic_wrapper: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_variant_group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trait_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutability_variant_group: Option<String>,
    #[serde(default)]
    pub stable_counterpart: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner_case: Option<CornerCase>,
}

impl Default for ApiMeta {
    fn default() -> Self {
        Self {
            namespace: default_namespace(),
            unsafe_flag: true,
            intrinsic_wrapper: false,
            numeric_variant_group: None,
            trait_name: None,
            mutability_variant_group: None,
            stable_counterpart: false,
            corner_case: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiRecord {
    pub identifier: ApiIdentifier,
    pub impl_type: String,
    pub signature: ApiSignature,
    pub triplets: Vec<SafetyTriplet>,
    pub meta: ApiMeta,
}

impl ApiRecord {
    pub fn name(&self) -> &str {
        &self.signature.name
    }

    /// Canonical sort key of a triplet: subject rank, then catalog order.
    pub(crate) fn triplet_key(&self, t: &SafetyTriplet, catalog: &PropertyCatalog) -> (usize, usize) {
        (
            t.subject.rank(&self.signature).unwrap_or(usize::MAX),
            catalog.order_of(&t.property).unwrap_or(usize::MAX),
        )
    }

    /// Copy with triplets in canonical order.
    pub fn canonicalized(&self, catalog: &PropertyCatalog) -> ApiRecord {
        let mut out = self.clone();
        out.triplets.sort_by_key(|t| self.triplet_key(t, catalog));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocDatabase {
    pub records: BTreeMap<ApiIdentifier, ApiRecord>,
    pub catalog_version: String,
}

impl DocDatabase {
    pub fn lookup(&self, id: &str) -> Option<&ApiRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ApiRecord> {
        self.records.values()
    }

    /// Records whose signature name equals `name`, in identifier order.
    pub fn by_name<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ApiRecord> + 'a {
        self.records.values().filter(move |r| r.signature.name == name)
    }
}

/// Primary properties referenced by a record; sub-property triplets project
/// to their parent.
pub fn labels_of(record: &ApiRecord, catalog: &PropertyCatalog) -> BTreeSet<String> {
    record
        .triplets
        .iter()
        .filter_map(|t| catalog.primary_of(&t.property))
        .map(str::to_string)
        .collect()
}
