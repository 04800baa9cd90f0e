//! The safety-property catalog: 13 primary properties split into
//! preconditions and postconditions, their sub-properties, the prerequisite
//! hierarchy between them, and the undefined-behavior reference tables.
//!
//! A catalog is plain data loaded from a TOML document (see [`load_catalog`]);
//! the default one ships with the crate as [`SHIPPED_CATALOG`].

mod hierarchy;
mod load;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use hierarchy::{prerequisite_closure, primary_closure, topological_order};
pub use load::{load_catalog, CatalogError};
pub use validate::{validate_catalog, ShippedProfile};

/// The catalog document bundled with the crate.
pub const SHIPPED_CATALOG: &str = include_str!("../../data/catalog.toml");

/// Loads [`SHIPPED_CATALOG`]. The bundled file is covered by tests, so a
/// failure here is a build defect.
pub fn shipped_catalog() -> PropertyCatalog {
    load_catalog(SHIPPED_CATALOG).expect("bundled catalog is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Pre,
    Post,
}

impl Category {
    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "Pre" => Some(Category::Pre),
            "Post" => Some(Category::Post),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Pre => "Pre",
            Category::Post => "Post",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubProperty {
    /// Canonical id, unique across the catalog. Parent-qualified
    /// (`Parent/Name`) when the name repeats the parent's id.
    pub id: String,
    pub parent: String,
    pub definition: String,
    pub example_api: Option<String>,
    /// Marker traits (no callable method), e.g. `Send` and `Sync`.
    pub marker: bool,
}

impl SubProperty {
    /// Unqualified name shown to users.
    pub fn display_name(&self) -> &str {
        display_name(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyProperty {
    pub id: String,
    pub category: Category,
    pub definition: String,
    pub sub_properties: Vec<SubProperty>,
    pub example_api: String,
    pub expected_label_count: Option<u32>,
}

impl SafetyProperty {
    /// Number of distinct leaf definitions: the sub-properties, or the
    /// property itself when it has a single definition.
    pub fn leaf_count(&self) -> usize {
        self.sub_properties.len().max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HierarchyLevel {
    Primary,
    Sub,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HierarchyEdge {
    pub prerequisite: String,
    pub dependent: String,
    pub level: HierarchyLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UbEntry {
    pub text: String,
    /// One of the additions beyond the language reference list.
    pub extended: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UbCatalog {
    pub entries: Vec<UbEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvalidValue {
    pub type_name: String,
    pub invalid_description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InvalidValueCatalog {
    pub entries: Vec<InvalidValue>,
}

/// What an id refers to inside a catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyRef<'a> {
    Primary(&'a SafetyProperty),
    Sub(&'a SafetyProperty, &'a SubProperty),
}

impl<'a> PropertyRef<'a> {
    pub fn id(&self) -> &'a str {
        match self {
            PropertyRef::Primary(p) => &p.id,
            PropertyRef::Sub(_, s) => &s.id,
        }
    }

    pub fn primary(&self) -> &'a SafetyProperty {
        match self {
            PropertyRef::Primary(p) | PropertyRef::Sub(p, _) => p,
        }
    }

    pub fn is_sub(&self) -> bool {
        matches!(self, PropertyRef::Sub(..))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyCatalog {
    pub version: String,
    pub properties: Vec<SafetyProperty>,
    pub hierarchy: Vec<HierarchyEdge>,
    pub ub_catalog: UbCatalog,
    pub invalid_values: InvalidValueCatalog,
}

impl PropertyCatalog {
    pub fn property(&self, id: &str) -> Option<&SafetyProperty> {
        self.properties.iter().find(|p| p.id == id)
    }

    /// Resolves a property-or-sub id. Primary ids win over a sub-property
    /// written without its parent qualifier.
    pub fn resolve(&self, id: &str) -> Option<PropertyRef<'_>> {
        if let Some(p) = self.property(id) {
            return Some(PropertyRef::Primary(p));
        }
        self.properties.iter().find_map(|p| {
            p.sub_properties
                .iter()
                .find(|s| s.id == id)
                .map(|s| PropertyRef::Sub(p, s))
        })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.resolve(id).is_some()
    }

    /// Projects a property-or-sub id to its primary property id.
    pub fn primary_of(&self, id: &str) -> Option<&str> {
        self.resolve(id).map(|r| r.primary().id.as_str())
    }

    pub fn category_of(&self, id: &str) -> Option<Category> {
        self.resolve(id).map(|r| r.primary().category)
    }

    /// Primary property ids in catalog order.
    pub fn primary_ids(&self) -> impl Iterator<Item = &str> {
        self.properties.iter().map(|p| p.id.as_str())
    }

    /// Every id (each primary followed by its sub-properties) in catalog order.
    pub fn all_ids(&self) -> impl Iterator<Item = &str> {
        self.properties.iter().flat_map(|p| {
            std::iter::once(p.id.as_str()).chain(p.sub_properties.iter().map(|s| s.id.as_str()))
        })
    }

    /// Position of an id in [`all_ids`](Self::all_ids) order.
    pub fn order_of(&self, id: &str) -> Option<usize> {
        self.all_ids().position(|x| x == id)
    }

    /// Display label: `Layout` for a primary, `Layout (Aligned)` for a sub.
    pub fn display_label(&self, id: &str) -> String {
        match self.resolve(id) {
            Some(PropertyRef::Sub(p, s)) => format!("{} ({})", p.id, s.display_name()),
            _ => id.to_string(),
        }
    }

    pub fn sub_property_count(&self) -> usize {
        self.properties.iter().map(SafetyProperty::leaf_count).sum()
    }

    pub fn count_in(&self, category: Category) -> (usize, usize) {
        self.properties
            .iter()
            .filter(|p| p.category == category)
            .fold((0, 0), |(n, subs), p| (n + 1, subs + p.leaf_count()))
    }
}

/// Strips a `Parent/` qualifier.
pub fn display_name(id: &str) -> &str {
    id.rsplit_once('/').map_or(id, |(_, name)| name)
}
