//! Structural checks over a catalog. Problems are reported, never raised.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gql;
use crate::value::Ident;

use super::model::*;

pub mod codes {
    pub const BAD_IDENTIFIER: &str = "BAD_IDENTIFIER";
    pub const DUPLICATE_NAME: &str = "DUPLICATE_NAME";
    pub const EMPTY_CLASS: &str = "EMPTY_CLASS";
    pub const REMOTE_ENDPOINT_MISSING: &str = "REMOTE_ENDPOINT_MISSING";
    pub const ADAPTER_STORAGE_MISMATCH: &str = "ADAPTER_STORAGE_MISMATCH";
    pub const EMPTY_LOCATION: &str = "EMPTY_LOCATION";
    pub const UNKNOWN_SITE: &str = "UNKNOWN_SITE";
    pub const UNKNOWN_CLASS: &str = "UNKNOWN_CLASS";
    pub const UNKNOWN_ATTRIBUTE: &str = "UNKNOWN_ATTRIBUTE";
    pub const UNKNOWN_LOCAL_CLASS: &str = "UNKNOWN_LOCAL_CLASS";
    pub const UNKNOWN_LOCAL_ATTRIBUTE: &str = "UNKNOWN_LOCAL_ATTRIBUTE";
    pub const MISSING_LOCAL_SCHEMA: &str = "MISSING_LOCAL_SCHEMA";
    pub const MISSING_MAPPING: &str = "MISSING_MAPPING";
    pub const DUPLICATE_MAPPING: &str = "DUPLICATE_MAPPING";
    pub const EMPTY_MAPPING: &str = "EMPTY_MAPPING";
    pub const ILLEGAL_CAST: &str = "ILLEGAL_CAST";
    pub const CAST_SOURCE_MISMATCH: &str = "CAST_SOURCE_MISMATCH";
    pub const CAST_TARGET_MISMATCH: &str = "CAST_TARGET_MISMATCH";
    pub const TYPE_MISMATCH: &str = "TYPE_MISMATCH";
    pub const DEFAULT_TYPE_MISMATCH: &str = "DEFAULT_TYPE_MISMATCH";
    pub const HORIZONTAL_REQUIRED_UNMAPPED: &str = "HORIZONTAL_REQUIRED_UNMAPPED";
    pub const NULLABLE_COVERAGE_GAP: &str = "NULLABLE_COVERAGE_GAP";
    pub const VERTICAL_KEY_MISSING: &str = "VERTICAL_KEY_MISSING";
    pub const VERTICAL_KEY_UNMAPPED: &str = "VERTICAL_KEY_UNMAPPED";
    pub const COVERAGE_GAP: &str = "COVERAGE_GAP";
    pub const INVALID_ROUTE: &str = "INVALID_ROUTE";
    pub const INVALID_VIEW: &str = "INVALID_VIEW";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: String,
    /// Dotted path to the offending catalog element.
    pub locus: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {} at {}: {}", self.code, self.locus, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    fn error(&mut self, code: &str, locus: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            code: code.to_string(),
            locus: locus.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, code: &str, locus: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            code: code.to_string(),
            locus: locus.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of the catalog. Pure: the same catalog
/// always yields the same report.
pub fn validate_catalog(c: &Catalog) -> ValidationReport {
    let mut r = ValidationReport::default();
    check_classes(c, &mut r);
    check_sites(c, &mut r);
    check_local_schemas(c, &mut r);
    check_mappings(c, &mut r);
    check_views(c, &mut r);
    r
}

fn check_ident(r: &mut ValidationReport, locus: &str, name: &Ident) {
    if !Ident::is_well_formed(name.as_str()) {
        r.error(codes::BAD_IDENTIFIER, locus, format!("{name:?} is not a valid identifier"));
    }
}

fn duplicates<'a>(names: impl Iterator<Item = &'a Ident>) -> Vec<&'a Ident> {
    let mut seen = HashSet::new();
    names.filter(|n| !seen.insert(n.key())).collect()
}

fn check_classes(c: &Catalog, r: &mut ValidationReport) {
    for dup in duplicates(c.classes.iter().map(|cl| &cl.name)) {
        r.error(codes::DUPLICATE_NAME, format!("classes.{dup}"), "class name declared more than once");
    }
    for class in &c.classes {
        let locus = format!("classes.{}", class.name);
        check_ident(r, &locus, &class.name);
        if class.attributes.is_empty() {
            r.error(codes::EMPTY_CLASS, &locus, "a virtual class needs at least one attribute");
        }
        for attr in &class.attributes {
            check_ident(r, &format!("{locus}.{}", attr.name), &attr.name);
        }
        for dup in duplicates(class.attributes.iter().map(|a| &a.name)) {
            r.error(codes::DUPLICATE_NAME, format!("{locus}.{dup}"), "attribute declared more than once");
        }
    }
}

fn check_sites(c: &Catalog, r: &mut ValidationReport) {
    for dup in duplicates(c.sites.iter().map(|s| &s.id)) {
        r.error(codes::DUPLICATE_NAME, format!("sites.{dup}"), "site id declared more than once");
    }
    for site in &c.sites {
        let locus = format!("sites.{}", site.id);
        check_ident(r, &locus, &site.id);
        if site.mode == SiteMode::Remote && site.endpoint.as_deref().is_none_or(str::is_empty) {
            r.error(codes::REMOTE_ENDPOINT_MISSING, &locus, "REMOTE site requires an endpoint");
        }
        if let Some(ls) = c.local_schema(site.id.as_str()) {
            if ls.storage.format != site.adapter.storage_format() {
                r.error(
                    codes::ADAPTER_STORAGE_MISMATCH,
                    &locus,
                    format!("{} adapter cannot read {:?} storage", site.adapter, ls.storage.format),
                );
            }
        }
    }
}

fn check_local_schemas(c: &Catalog, r: &mut ValidationReport) {
    for dup in duplicates(c.local_schemas.iter().map(|l| &l.site)) {
        r.error(codes::DUPLICATE_NAME, format!("local_schemas.{dup}"), "site has more than one local schema");
    }
    for ls in &c.local_schemas {
        let locus = format!("local_schemas.{}", ls.site);
        if c.site(ls.site.as_str()).is_none() {
            r.error(codes::UNKNOWN_SITE, &locus, format!("site {} is not registered", ls.site));
        }
        if ls.storage.location.trim().is_empty() {
            r.error(codes::EMPTY_LOCATION, format!("{locus}.storage"), "storage location is empty");
        }
        for dup in duplicates(ls.classes.iter().map(|cl| &cl.name)) {
            r.error(codes::DUPLICATE_NAME, format!("{locus}.{dup}"), "local class declared more than once");
        }
        for class in &ls.classes {
            for dup in duplicates(class.attributes.iter().map(|a| &a.name)) {
                r.error(
                    codes::DUPLICATE_NAME,
                    format!("{locus}.{}.{dup}", class.name),
                    "local attribute declared more than once",
                );
            }
        }
    }
}

fn check_mappings(c: &Catalog, r: &mut ValidationReport) {
    for dup in duplicates(c.mappings.iter().map(|m| &m.class)) {
        r.error(codes::DUPLICATE_MAPPING, format!("mappings.{dup}"), "class has more than one mapping rule");
    }
    for class in &c.classes {
        if c.mapping(class.name.as_str()).is_none() {
            r.error(codes::MISSING_MAPPING, format!("classes.{}", class.name), "class has no mapping rule");
        }
    }
    for (mi, rule) in c.mappings.iter().enumerate() {
        let locus = format!("mappings[{mi}]({})", rule.class);
        let Some(class) = c.class(rule.class.as_str()) else {
            r.error(codes::UNKNOWN_CLASS, &locus, format!("class {} is not declared", rule.class));
            continue;
        };
        if rule.fragments.is_empty() {
            r.error(codes::EMPTY_MAPPING, &locus, "mapping rule has no fragments");
            continue;
        }
        for (fi, frag) in rule.fragments.iter().enumerate() {
            check_fragment(c, class, rule, frag, &format!("{locus}.fragments[{fi}]"), r);
        }
        match rule.kind {
            MappingKind::Horizontal => check_horizontal(class, rule, &locus, r),
            MappingKind::Vertical => check_vertical(class, rule, &locus, r),
        }
    }
}

fn check_fragment(
    c: &Catalog,
    class: &VirtualClass,
    rule: &MappingRule,
    frag: &Fragment,
    locus: &str,
    r: &mut ValidationReport,
) {
    if c.site(frag.site.as_str()).is_none() {
        r.error(codes::UNKNOWN_SITE, locus, format!("site {} is not registered", frag.site));
    }
    let local_class = match c.local_schema(frag.site.as_str()) {
        None => {
            r.error(codes::MISSING_LOCAL_SCHEMA, locus, format!("site {} has no local schema", frag.site));
            None
        }
        Some(ls) => {
            let lc = ls.class(frag.local_class.as_str());
            if lc.is_none() {
                r.error(
                    codes::UNKNOWN_LOCAL_CLASS,
                    locus,
                    format!("site {} has no local class {}", frag.site, frag.local_class),
                );
            }
            lc
        }
    };
    for dup in duplicates(frag.attr_maps.iter().map(|m| &m.global)) {
        r.error(codes::DUPLICATE_NAME, format!("{locus}.{dup}"), "global attribute mapped twice in one fragment");
    }
    for map in &frag.attr_maps {
        let mlocus = format!("{locus}.{}", map.global);
        let Some(global) = class.attribute(map.global.as_str()) else {
            r.error(codes::UNKNOWN_ATTRIBUTE, &mlocus, format!("{} has no attribute {}", class.name, map.global));
            continue;
        };
        if let Some(cast) = map.cast {
            if !cast.is_legal() {
                r.error(codes::ILLEGAL_CAST, &mlocus, format!("cast {cast} is not in the coercion matrix"));
            } else if cast.to != global.ty {
                r.error(
                    codes::CAST_TARGET_MISMATCH,
                    &mlocus,
                    format!("cast {cast} does not produce {} ({})", global.name, global.ty),
                );
            }
        }
        if let Some(default) = &map.default {
            if default.coerce_to(global.ty).is_none() {
                r.error(
                    codes::DEFAULT_TYPE_MISMATCH,
                    &mlocus,
                    format!("default {} is not a {}", default.to_literal(), global.ty),
                );
            }
        }
        let Some(lc) = local_class else { continue };
        match lc.attribute(map.local.as_str()) {
            None if map.default.is_some() => {}
            None => r.error(
                codes::UNKNOWN_LOCAL_ATTRIBUTE,
                &mlocus,
                format!("{}.{} has no attribute {}", frag.site, frag.local_class, map.local),
            ),
            Some(local) => match map.cast {
                Some(cast) if cast.from != local.ty => r.error(
                    codes::CAST_SOURCE_MISMATCH,
                    &mlocus,
                    format!("cast {cast} applied to {} of type {}", local.name, local.ty),
                ),
                Some(_) => {}
                None if local.ty != global.ty => r.error(
                    codes::TYPE_MISMATCH,
                    &mlocus,
                    format!("{} is {} but {} is {}; declare a cast", local.name, local.ty, global.name, global.ty),
                ),
                None => {}
            },
        }
    }
    if let Some(route) = &frag.route_when {
        if rule.kind == MappingKind::Vertical {
            r.error(codes::INVALID_ROUTE, locus, "route_when applies to horizontal mappings only");
        }
        for cmp in route.comparisons() {
            if let Err(msg) = gql::check_comparison(class, cmp) {
                r.error(codes::INVALID_ROUTE, locus, msg);
            }
        }
    }
}

fn check_horizontal(class: &VirtualClass, rule: &MappingRule, locus: &str, r: &mut ValidationReport) {
    for (fi, frag) in rule.fragments.iter().enumerate() {
        for attr in &class.attributes {
            if frag.maps_global(attr.name.as_str()) {
                continue;
            }
            let flocus = format!("{locus}.fragments[{fi}].{}", attr.name);
            if attr.nullable {
                r.warning(
                    codes::NULLABLE_COVERAGE_GAP,
                    flocus,
                    format!("{} rows from {} will read {} as NULL", class.name, frag.site, attr.name),
                );
            } else {
                r.error(
                    codes::HORIZONTAL_REQUIRED_UNMAPPED,
                    flocus,
                    format!("non-nullable {} is unmapped and has no default", attr.name),
                );
            }
        }
    }
}

fn check_vertical(class: &VirtualClass, rule: &MappingRule, locus: &str, r: &mut ValidationReport) {
    match &rule.join_key {
        None => r.error(codes::VERTICAL_KEY_MISSING, locus, "vertical mapping needs a join_key"),
        Some(key) if class.attribute(key.as_str()).is_none() => {
            r.error(codes::UNKNOWN_ATTRIBUTE, locus, format!("join_key {key} is not an attribute of {}", class.name))
        }
        Some(key) => {
            for (fi, frag) in rule.fragments.iter().enumerate() {
                if !frag.maps_global(key.as_str()) {
                    r.error(
                        codes::VERTICAL_KEY_UNMAPPED,
                        format!("{locus}.fragments[{fi}]"),
                        format!("fragment at {} does not map join_key {key}", frag.site),
                    );
                }
            }
        }
    }
    for attr in &class.attributes {
        if !rule.fragments.iter().any(|f| f.maps_global(attr.name.as_str())) {
            r.error(codes::COVERAGE_GAP, format!("{locus}.{}", attr.name), "no fragment maps this attribute");
        }
    }
}

fn check_views(c: &Catalog, r: &mut ValidationReport) {
    for view in &c.views {
        let locus = format!("views.{}", view.name);
        check_ident(r, &locus, &view.name);
        if c.class(view.name.as_str()).is_some() {
            r.error(codes::DUPLICATE_NAME, &locus, "view name collides with a class");
        }
        if let Err(e) = gql::check_view_query(&view.query, c) {
            r.error(codes::INVALID_VIEW, &locus, e.to_string());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_catalog;
    use crate::testing::ACME_CATALOG;
    use crate::value::{CanonicalType, Cast};

    fn acme() -> Catalog {
        load_catalog(ACME_CATALOG).unwrap()
    }

    #[test]
    fn acme_is_valid() {
        let report = validate_catalog(&acme());
        assert!(report.is_ok(), "{report}");
        assert_eq!(report.errors().count(), 0);
    }

    #[test]
    fn vertical_key_unmapped() {
        let mut c = acme();
        let rule = c.mappings.iter_mut().find(|m| m.class == "Customer").unwrap();
        rule.fragments[1].attr_maps.retain(|m| m.global != "cust_id");
        let report = validate_catalog(&c);
        assert!(report.has_code(codes::VERTICAL_KEY_UNMAPPED), "{report}");
    }

    #[test]
    fn float_to_int_cast_is_illegal() {
        let mut c = acme();
        let rule = c.mappings.iter_mut().find(|m| m.class == "Employee").unwrap();
        rule.fragments[0].attr_maps[0].cast = Some(Cast::new(CanonicalType::Float, CanonicalType::Int));
        let report = validate_catalog(&c);
        assert!(report.has_code(codes::ILLEGAL_CAST), "{report}");
    }

    #[test]
    fn missing_cast_and_unknown_local_attribute() {
        let mut c = acme();
        let rule = c.mappings.iter_mut().find(|m| m.class == "Employee").unwrap();
        rule.fragments[1].attr_maps[2].cast = None;
        rule.fragments[0].attr_maps[1].local = "NOPE".into();
        let report = validate_catalog(&c);
        assert!(report.has_code(codes::TYPE_MISMATCH));
        assert!(report.has_code(codes::UNKNOWN_LOCAL_ATTRIBUTE));
    }

    #[test]
    fn horizontal_coverage() {
        let mut c = acme();
        let rule = c.mappings.iter_mut().find(|m| m.class == "Employee").unwrap();
        rule.fragments[1].attr_maps.retain(|m| m.global != "dept" && m.global != "emp_id");
        let report = validate_catalog(&c);
        assert!(report.has_code(codes::HORIZONTAL_REQUIRED_UNMAPPED));
        assert!(report.warnings().any(|w| w.code == codes::NULLABLE_COVERAGE_GAP));
    }

    #[test]
    fn remote_needs_endpoint_and_views_must_validate() {
        let mut c = acme();
        c.sites[0].mode = SiteMode::Remote;
        c.views.push(ViewDef { name: "Broken".into(), query: "SELECT nope FROM Employee".into() });
        let report = validate_catalog(&c);
        assert!(report.has_code(codes::REMOTE_ENDPOINT_MISSING));
        assert!(report.has_code(codes::INVALID_VIEW));
    }

    #[test]
    fn referential_closure() {
        let mut c = acme();
        c.mappings[0].fragments[0].site = "mars".into();
        c.mappings[1].class = "Ghost".into();
        let report = validate_catalog(&c);
        assert!(report.has_code(codes::UNKNOWN_SITE));
        assert!(report.has_code(codes::UNKNOWN_CLASS));
        assert!(report.has_code(codes::MISSING_MAPPING));
    }

    #[test]
    fn validation_is_pure() {
        let mut c = acme();
        c.mappings[0].fragments[0].attr_maps.clear();
        assert_eq!(validate_catalog(&c), validate_catalog(&c));
    }
}
