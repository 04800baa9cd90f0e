use std::collections::HashSet;

use super::hierarchy::find_cycle;
use super::load::edge_fits_level;
use super::{Category, HierarchyLevel, PropertyCatalog};
use crate::diagnostic::Diagnostic;

/// The published shape of the default catalog.
#[derive(Debug, Clone)]
pub struct ShippedProfile {
    pub properties: usize,
    pub sub_properties: usize,
    pub pre: (usize, usize),
    pub post: (usize, usize),
    pub label_counts: &'static [(&'static str, u32)],
    pub ub_entries: usize,
    pub ub_extended: usize,
    pub invalid_values: usize,
}

impl ShippedProfile {
    pub const fn get() -> Self {
        Self {
            properties: 13,
            sub_properties: 22,
            pre: (7, 14),
            post: (6, 8),
            label_counts: &[
                ("Allocated", 172),
                ("Bounded", 141),
                ("Initialized", 104),
                ("Layout", 109),
                ("SystemIO", 26),
                ("Thread", 2),
                ("Unreachable", 5),
                ("Aliased", 32),
                ("DualOwned", 46),
                ("Untyped", 37),
                ("Freed", 19),
                ("Leaked", 35),
                ("Pinned", 5),
            ],
            ub_entries: 12,
            ub_extended: 3,
            invalid_values: 12,
        }
    }
}

/// Checks every catalog invariant, structural and shipped-profile, and
/// returns one diagnostic per violation. Empty means the catalog conforms.
pub fn validate_catalog(catalog: &PropertyCatalog) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    structural(catalog, &mut out);
    conformance(catalog, &ShippedProfile::get(), &mut out);
    out
}

fn structural(catalog: &PropertyCatalog, out: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for p in &catalog.properties {
        if p.id.is_empty() {
            out.push(Diagnostic::new("empty id", "", "property with empty id"));
        } else if !seen.insert(p.id.as_str()) {
            out.push(Diagnostic::new("duplicate id", &p.id, "id used more than once"));
        }
        if p.definition.trim().is_empty() {
            out.push(Diagnostic::new("empty definition", &p.id, "property has no definition"));
        }
        if p.example_api.trim().is_empty() {
            out.push(Diagnostic::new("missing example api", &p.id, "property has no example API"));
        }
        for s in &p.sub_properties {
            if s.id.is_empty() {
                out.push(Diagnostic::new("empty id", &p.id, "sub-property with empty id"));
                continue;
            }
            if !seen.insert(s.id.as_str()) {
                out.push(Diagnostic::new("duplicate id", &s.id, "id used more than once"));
            }
            if s.parent != p.id {
                out.push(Diagnostic::new(
                    "sub-property parent mismatch",
                    &s.id,
                    format!("listed under {} but names parent {}", p.id, s.parent),
                ));
            }
            if let Some((q, _)) = s.id.rsplit_once('/') {
                if q != p.id {
                    out.push(Diagnostic::new("sub-property qualifier", &s.id, format!("qualifier {q} is not parent {}", p.id)));
                }
            }
            if s.definition.trim().is_empty() {
                out.push(Diagnostic::new("empty definition", &s.id, "sub-property has no definition"));
            }
        }
    }

    for e in &catalog.hierarchy {
        let label = format!("{} -> {}", e.prerequisite, e.dependent);
        let (a, b) = (catalog.resolve(&e.prerequisite), catalog.resolve(&e.dependent));
        if a.is_none() || b.is_none() {
            out.push(Diagnostic::new("unknown edge endpoint", label, "edge references an id missing from the catalog"));
            continue;
        }
        if e.prerequisite == e.dependent || edge_fits_level(catalog, e) {
            continue;
        }
        let (a, b) = (a.unwrap(), b.unwrap());
        if e.level == HierarchyLevel::Sub && a.is_sub() && b.is_sub() {
            out.push(Diagnostic::new(
                "cross-parent sub edge",
                label,
                format!("sub edge joins {} and {}", a.primary().id, b.primary().id),
            ));
        } else {
            out.push(Diagnostic::new("edge level mismatch", label, format!("endpoints do not fit level {:?}", e.level)));
        }
    }

    if let Some(cycle) = find_cycle(catalog) {
        out.push(Diagnostic::new("hierarchy cycle", cycle[0].clone(), cycle.join(" -> ")));
    }
}

fn conformance(catalog: &PropertyCatalog, profile: &ShippedProfile, out: &mut Vec<Diagnostic>) {
    if catalog.properties.len() != profile.properties {
        out.push(Diagnostic::new(
            "property count mismatch",
            "catalog",
            format!("expected {} properties, found {}", profile.properties, catalog.properties.len()),
        ));
    }
    let subs = catalog.sub_property_count();
    if subs != profile.sub_properties {
        out.push(Diagnostic::new(
            "sub-property count mismatch",
            "catalog",
            format!("expected {} sub-properties, found {subs}", profile.sub_properties),
        ));
    }
    for (category, expected) in [(Category::Pre, profile.pre), (Category::Post, profile.post)] {
        let found = catalog.count_in(category);
        if found != expected {
            out.push(Diagnostic::new(
                "category count mismatch",
                category.to_string(),
                format!(
                    "expected {} properties with {} sub-properties, found {} with {}",
                    expected.0, expected.1, found.0, found.1
                ),
            ));
        }
    }
    for &(id, count) in profile.label_counts {
        match catalog.property(id) {
            None => out.push(Diagnostic::new("missing property", id, "shipped property absent")),
            Some(p) if p.expected_label_count != Some(count) => out.push(Diagnostic::new(
                "label count mismatch",
                id,
                format!("expected {count}, found {:?}", p.expected_label_count),
            )),
            Some(_) => {}
        }
    }
    let ub = &catalog.ub_catalog.entries;
    let extended = ub.iter().filter(|u| u.extended).count();
    if ub.len() != profile.ub_entries || extended != profile.ub_extended {
        out.push(Diagnostic::new(
            "ub catalog mismatch",
            "ub",
            format!(
                "expected {} entries ({} extended), found {} ({extended})",
                profile.ub_entries,
                profile.ub_extended,
                ub.len()
            ),
        ));
    }
    if catalog.invalid_values.entries.len() != profile.invalid_values {
        out.push(Diagnostic::new(
            "invalid value catalog mismatch",
            "invalid_value",
            format!("expected {} entries, found {}", profile.invalid_values, catalog.invalid_values.entries.len()),
        ));
    }
}
