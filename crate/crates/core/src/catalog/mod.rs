//! The global conceptual schema and the global directory: virtual classes,
//! sites, local schemas, mapping rules and views, with validation and
//! versioned publication.

mod model;
mod store;
mod validate;

pub use model::*;
pub use store::CatalogStore;
pub use validate::{codes, validate_catalog, Issue, Severity, ValidationReport};

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("catalog parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("{kind} {name:?} not found")]
    NotFound { kind: &'static str, name: String },
    #[error("catalog failed validation with {} error(s)", .0.errors().count())]
    InvalidCatalog(ValidationReport),
}

/// Parses a catalog document. The returned catalog carries the document's
/// `version_hint` (or 1) as its version; it is not yet known to be valid.
pub fn load_catalog(document: &str) -> Result<Catalog, CatalogError> {
    let mut catalog: Catalog = serde_json::from_str(document).map_err(|e| CatalogError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if catalog.version == 0 {
        catalog.version = 1;
    }
    check_unique("class", catalog.classes.iter().map(|c| c.name.as_str()))?;
    check_unique("site", catalog.sites.iter().map(|s| s.id.as_str()))?;
    check_unique("view", catalog.views.iter().map(|v| v.name.as_str()))?;
    Ok(catalog)
}

fn check_unique<'a>(kind: &'static str, names: impl Iterator<Item = &'a str>) -> Result<(), CatalogError> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name.to_ascii_lowercase()) {
            return Err(CatalogError::DuplicateName { kind, name: name.to_string() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupKind {
    Class,
    Site,
    View,
    Mapping,
}

impl LookupKind {
    fn label(self) -> &'static str {
        match self {
            LookupKind::Class => "class",
            LookupKind::Site => "site",
            LookupKind::View => "view",
            LookupKind::Mapping => "mapping",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entry<'a> {
    Class(&'a VirtualClass),
    Site(&'a SiteDescriptor),
    View(&'a ViewDef),
    Mapping(&'a MappingRule),
}

/// Case-insensitive directory lookup.
pub fn lookup<'a>(catalog: &'a Catalog, kind: LookupKind, name: &str) -> Result<Entry<'a>, CatalogError> {
    let found = match kind {
        LookupKind::Class => catalog.class(name).map(Entry::Class),
        LookupKind::Site => catalog.site(name).map(Entry::Site),
        LookupKind::View => catalog.view(name).map(Entry::View),
        LookupKind::Mapping => catalog.mapping(name).map(Entry::Mapping),
    };
    found.ok_or_else(|| CatalogError::NotFound { kind: kind.label(), name: name.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::ACME_CATALOG;

    #[test]
    fn acme_loads() {
        let c = load_catalog(ACME_CATALOG).unwrap();
        assert_eq!(c.classes.len(), 2);
        assert_eq!(c.mappings.len(), 2);
        assert_eq!(c.sites.len(), 3);
        assert!(c.version >= 1);
    }

    #[test]
    fn duplicate_class_names() {
        let doc = r#"{"classes": [
            {"name": "Employee", "attributes": [{"name": "a", "type": "INT"}]},
            {"name": "employee", "attributes": [{"name": "a", "type": "INT"}]}
        ]}"#;
        assert_eq!(
            load_catalog(doc),
            Err(CatalogError::DuplicateName { kind: "class", name: "employee".into() })
        );
    }

    #[test]
    fn empty_document() {
        let c = load_catalog(r#"{"classes": [], "sites": []}"#).unwrap();
        assert_eq!(c.version, 1);
        assert!(c.classes.is_empty());
    }

    #[test]
    fn parse_error_has_locus() {
        match load_catalog("{\n  \"classes\": [ {\"name\": 3} ]\n}") {
            Err(CatalogError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            load_catalog(r#"{"mappings":[{"class":"A","kind":"HORIZONTAL","fragments":[{"site":"s","local_class":"t","route_when":"a = "}]}]}"#),
            Err(CatalogError::Parse { .. })
        ));
    }

    #[test]
    fn lookups() {
        let c = load_catalog(ACME_CATALOG).unwrap();
        match lookup(&c, LookupKind::Class, "employee").unwrap() {
            Entry::Class(class) => assert_eq!(class.name.as_str(), "Employee"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(lookup(&c, LookupKind::Site, "hq"), Ok(Entry::Site(s)) if s.id == "hq"));
        assert!(matches!(lookup(&c, LookupKind::Mapping, "CUSTOMER"), Ok(Entry::Mapping(_))));
        assert_eq!(
            lookup(&c, LookupKind::Class, "Ghost"),
            Err(CatalogError::NotFound { kind: "class", name: "Ghost".into() })
        );
    }

    #[test]
    fn round_trip_is_field_for_field() {
        let c = load_catalog(ACME_CATALOG).unwrap();
        let again = load_catalog(&c.to_document()).unwrap();
        assert_eq!(c, again);
    }
}
