use std::collections::HashSet;

use serde::Deserialize;
use toml::Spanned;

use super::hierarchy::find_cycle;
use super::{
    Category, HierarchyEdge, HierarchyLevel, InvalidValue, InvalidValueCatalog, PropertyCatalog,
    SafetyProperty, SubProperty, UbCatalog, UbEntry,
};
use crate::diagnostic::Site;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    Malformed(String),
    #[error("{site}: duplicate id `{id}`")]
    DuplicateId { id: String, site: Site },
    #[error("{site}: empty id")]
    EmptyId { site: Site },
    #[error("{site}: unknown category `{token}` (expected Pre or Post)")]
    UnknownCategory { token: String, site: Site },
    #[error("{site}: sub-property `{id}` is qualified with `{qualifier}` but belongs to `{parent}`")]
    BadQualifier {
        id: String,
        qualifier: String,
        parent: String,
        site: Site,
    },
    #[error("{site}: edge references unknown id `{id}`")]
    UnknownEdgeEndpoint { id: String, site: Site },
    #[error("{site}: edge {prerequisite} -> {dependent} does not fit level {level:?}")]
    InvalidEdge {
        prerequisite: String,
        dependent: String,
        level: HierarchyLevel,
        site: Site,
    },
    #[error("{site}: hierarchy cycle {}", path.join(" -> "))]
    Cycle { path: Vec<String>, site: Site },
    #[error("unknown property id `{0}`")]
    UnknownId(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    #[serde(default)]
    version: String,
    #[serde(default)]
    property: Vec<RawProperty>,
    #[serde(default)]
    edge: Vec<RawEdge>,
    #[serde(default)]
    ub: Vec<UbRaw>,
    #[serde(default)]
    invalid_value: Vec<InvalidRaw>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    id: Spanned<String>,
    category: Spanned<String>,
    #[serde(default)]
    definition: String,
    #[serde(default)]
    sub_properties: Vec<RawSub>,
    #[serde(default)]
    example_api: String,
    expected_label_count: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSub {
    id: Spanned<String>,
    parent: Option<Spanned<String>>,
    #[serde(default)]
    definition: String,
    example_api: Option<String>,
    #[serde(default)]
    marker: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    prerequisite: Spanned<String>,
    dependent: Spanned<String>,
    level: HierarchyLevel,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UbRaw {
    text: String,
    #[serde(default)]
    extended: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InvalidRaw {
    type_name: String,
    invalid_description: String,
}

/// Parses and structurally validates a catalog document.
///
/// Structural invariants (unique ids, known categories, edges between known
/// nodes at the right level, acyclic hierarchy) are enforced here. Conformance
/// to the shipped profile (counts, label totals) is left to
/// [`validate_catalog`](super::validate_catalog).
pub fn load_catalog(source: &str) -> Result<PropertyCatalog, CatalogError> {
    let raw: RawCatalog =
        toml::from_str(source).map_err(|e| CatalogError::Malformed(e.to_string()))?;
    let site = |span: std::ops::Range<usize>| Site::of_span(source, span);

    let mut seen = HashSet::new();
    let mut properties = Vec::with_capacity(raw.property.len());
    for p in raw.property {
        let pid = p.id.get_ref().clone();
        if pid.is_empty() {
            return Err(CatalogError::EmptyId { site: site(p.id.span()) });
        }
        if !seen.insert(pid.clone()) {
            return Err(CatalogError::DuplicateId { id: pid, site: site(p.id.span()) });
        }
        let category = Category::parse(p.category.get_ref()).ok_or_else(|| {
            CatalogError::UnknownCategory {
                token: p.category.get_ref().clone(),
                site: site(p.category.span()),
            }
        })?;
        let mut subs = Vec::with_capacity(p.sub_properties.len());
        for s in p.sub_properties {
            let sid = s.id.get_ref().clone();
            if sid.is_empty() || sid.ends_with('/') {
                return Err(CatalogError::EmptyId { site: site(s.id.span()) });
            }
            if let Some((qualifier, _)) = sid.rsplit_once('/') {
                if qualifier != pid {
                    return Err(CatalogError::BadQualifier {
                        id: sid.clone(),
                        qualifier: qualifier.to_string(),
                        parent: pid.clone(),
                        site: site(s.id.span()),
                    });
                }
            }
            if let Some(parent) = &s.parent {
                if parent.get_ref() != &pid {
                    return Err(CatalogError::BadQualifier {
                        id: sid.clone(),
                        qualifier: parent.get_ref().clone(),
                        parent: pid.clone(),
                        site: site(parent.span()),
                    });
                }
            }
            if !seen.insert(sid.clone()) {
                return Err(CatalogError::DuplicateId { id: sid, site: site(s.id.span()) });
            }
            subs.push(SubProperty {
                id: sid,
                parent: pid.clone(),
                definition: s.definition,
                example_api: s.example_api,
                marker: s.marker,
            });
        }
        properties.push(SafetyProperty {
            id: pid,
            category,
            definition: p.definition,
            sub_properties: subs,
            example_api: p.example_api,
            expected_label_count: p.expected_label_count,
        });
    }

    let mut catalog = PropertyCatalog {
        version: raw.version,
        properties,
        hierarchy: Vec::with_capacity(raw.edge.len()),
        ub_catalog: UbCatalog {
            entries: raw.ub.into_iter().map(|u| UbEntry { text: u.text, extended: u.extended }).collect(),
        },
        invalid_values: InvalidValueCatalog {
            entries: raw
                .invalid_value
                .into_iter()
                .map(|v| InvalidValue { type_name: v.type_name, invalid_description: v.invalid_description })
                .collect(),
        },
    };

    let mut edge_sites = Vec::with_capacity(raw.edge.len());
    for e in raw.edge {
        for end in [&e.prerequisite, &e.dependent] {
            if !catalog.contains(end.get_ref()) {
                return Err(CatalogError::UnknownEdgeEndpoint {
                    id: end.get_ref().clone(),
                    site: site(end.span()),
                });
            }
        }
        let edge = HierarchyEdge {
            prerequisite: e.prerequisite.get_ref().clone(),
            dependent: e.dependent.get_ref().clone(),
            level: e.level,
        };
        // Self-loops are reported as cycles below, not as level violations.
        if edge.prerequisite != edge.dependent && !edge_fits_level(&catalog, &edge) {
            return Err(CatalogError::InvalidEdge {
                prerequisite: edge.prerequisite,
                dependent: edge.dependent,
                level: edge.level,
                site: site(e.prerequisite.span()),
            });
        }
        edge_sites.push(site(e.prerequisite.span()));
        catalog.hierarchy.push(edge);
    }

    if let Some(path) = find_cycle(&catalog) {
        let first = &path[0];
        let at = catalog
            .hierarchy
            .iter()
            .position(|e| &e.prerequisite == first)
            .map(|i| edge_sites[i].clone())
            .unwrap_or(Site::Path("edge".into()));
        return Err(CatalogError::Cycle { path, site: at });
    }

    Ok(catalog)
}

/// Primary edges join two primary properties; sub edges join two
/// sub-properties of the same parent.
pub(super) fn edge_fits_level(catalog: &PropertyCatalog, edge: &HierarchyEdge) -> bool {
    let (Some(a), Some(b)) = (catalog.resolve(&edge.prerequisite), catalog.resolve(&edge.dependent)) else {
        return false;
    };
    match edge.level {
        HierarchyLevel::Primary => !a.is_sub() && !b.is_sub(),
        HierarchyLevel::Sub => a.is_sub() && b.is_sub() && a.primary().id == b.primary().id,
    }
}
