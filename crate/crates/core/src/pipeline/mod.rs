//! Schema integration: local schemas are transformed into canonical types,
//! declared correspondences are checked, and virtual classes with their
//! mapping rules are derived from an integration intent. Also detects local
//! schema evolution and invalidates affected mappings.

mod document;
mod integrate;
mod investigate;

pub use document::{run_pipeline, PipelineSpec};
pub use integrate::{assemble, integrate, AttributeIntent, ClassIntent, IntegrationOutput, MemberIntent};
pub use investigate::{investigate, Conflict, ConflictKind, Correspondence, CorrespondenceReport, Endpoint, Role};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, LocalSchemaDescriptor, ValidationReport};
use crate::value::{CanonicalType, Ident};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("no canonical type bound for native type {native} ({site}.{class}.{attr})")]
    UnboundNativeType { site: String, class: String, attr: String, native: String },
    #[error("correspondence endpoint {0} does not resolve")]
    UnresolvedEndpoint(String),
    #[error("class {class} cannot be integrated over conflicting correspondences: {}", .conflicts.join("; "))]
    ConflictingInput { class: String, conflicts: Vec<String> },
    #[error("attribute {class}.{attr} is required but {site} provides no value and no default is declared")]
    CoverageGap { class: String, attr: String, site: String },
    #[error("cannot diff schemas of different sites ({old} vs {new})")]
    SiteMismatch { old: String, new: String },
    #[error("site {0} is not registered")]
    UnknownSite(String),
    #[error("invalid integration intent: {0}")]
    InvalidIntent(String),
    #[error("integrated catalog is invalid:\n{0}")]
    InvalidCatalog(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeOverride {
    pub class: Ident,
    pub attr: Ident,
    #[serde(rename = "type")]
    pub ty: CanonicalType,
}

/// How one site's native type names map onto canonical types.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformationRuleSet {
    pub site: Ident,
    /// Native type name (case-insensitive) to canonical type.
    #[serde(default)]
    pub bindings: BTreeMap<String, CanonicalType>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<TypeOverride>,
}

impl TransformationRuleSet {
    fn bind(&self, class: &Ident, attr: &Ident, native: &str) -> Option<CanonicalType> {
        if let Some(o) = self.overrides.iter().find(|o| o.class == *class && o.attr == *attr) {
            return Some(o.ty);
        }
        self.bindings
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(native))
            .map(|(_, t)| *t)
            .or_else(|| native.parse().ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalAttribute {
    pub name: Ident,
    #[serde(rename = "type")]
    pub ty: CanonicalType,
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalClass {
    pub name: Ident,
    pub attributes: Vec<CanonicalAttribute>,
}

impl CanonicalClass {
    pub fn attribute(&self, name: &str) -> Option<&CanonicalAttribute> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

/// A local schema expressed purely in canonical types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalLocalSchema {
    pub site: Ident,
    pub classes: Vec<CanonicalClass>,
}

impl CanonicalLocalSchema {
    pub fn class(&self, name: &str) -> Option<&CanonicalClass> {
        self.classes.iter().find(|c| c.name == name)
    }
}

/// Applies the site's rules to every attribute. Canonical tag names
/// (`INT`, `FLOAT`, `STRING`, `BOOL`) bind to themselves.
pub fn transform_local_schema(
    ls: &LocalSchemaDescriptor,
    rules: &TransformationRuleSet,
) -> Result<CanonicalLocalSchema, PipelineError> {
    let classes = ls
        .classes
        .iter()
        .map(|c| {
            let attributes = c
                .attributes
                .iter()
                .map(|a| {
                    let native = a.native_type();
                    let ty = rules.bind(&c.name, &a.name, native).ok_or_else(|| PipelineError::UnboundNativeType {
                        site: ls.site.to_string(),
                        class: c.name.to_string(),
                        attr: a.name.to_string(),
                        native: native.to_string(),
                    })?;
                    Ok(CanonicalAttribute { name: a.name.clone(), ty, nullable: a.nullable })
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            Ok(CanonicalClass { name: c.name.clone(), attributes })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(CanonicalLocalSchema { site: ls.site.clone(), classes })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub class: Ident,
    pub attr: Ident,
}

impl fmt::Display for SchemaEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class, self.attr)
    }
}

/// Attribute-level differences between two versions of one site's schema.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SchemaDiff {
    pub site: Ident,
    pub added: Vec<SchemaEntry>,
    pub removed: Vec<SchemaEntry>,
    pub retyped: Vec<SchemaEntry>,
}

impl SchemaDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.retyped.is_empty()
    }

    fn breaks(&self, class: &Ident, attr: &Ident) -> bool {
        self.removed.iter().chain(&self.retyped).any(|e| e.class == *class && e.attr == *attr)
    }
}

fn entries(ls: &LocalSchemaDescriptor) -> Vec<(SchemaEntry, CanonicalType)> {
    ls.classes
        .iter()
        .flat_map(|c| {
            c.attributes
                .iter()
                .map(|a| (SchemaEntry { class: c.name.clone(), attr: a.name.clone() }, a.ty))
        })
        .collect()
}

pub fn diff_local_schema(old: &LocalSchemaDescriptor, new: &LocalSchemaDescriptor) -> Result<SchemaDiff, PipelineError> {
    if old.site != new.site {
        return Err(PipelineError::SiteMismatch { old: old.site.to_string(), new: new.site.to_string() });
    }
    let (before, after) = (entries(old), entries(new));
    let find = |set: &[(SchemaEntry, CanonicalType)], e: &SchemaEntry| set.iter().find(|(x, _)| x == e).map(|(_, t)| *t);
    let mut d = SchemaDiff { site: old.site.clone(), ..SchemaDiff::default() };
    for (e, t) in &before {
        match find(&after, e) {
            None => d.removed.push(e.clone()),
            Some(t2) if t2 != *t => d.retyped.push(e.clone()),
            Some(_) => {}
        }
    }
    d.added = after.iter().filter(|(e, _)| find(&before, e).is_none()).map(|(e, _)| e.clone()).collect();
    Ok(d)
}

/// Flags every mapping whose fragments at the diff's site read a removed or
/// retyped attribute. Returns a new catalog one version ahead.
pub fn mark_stale(c: &Catalog, d: &SchemaDiff) -> Result<Catalog, PipelineError> {
    if c.site(d.site.as_str()).is_none() {
        return Err(PipelineError::UnknownSite(d.site.to_string()));
    }
    let mut out = c.clone();
    out.version = c.version + 1;
    for rule in &mut out.mappings {
        let hit = rule
            .fragments
            .iter()
            .filter(|f| f.site == d.site)
            .any(|f| f.attr_maps.iter().any(|m| d.breaks(&f.local_class, &m.local)));
        if hit {
            rule.stale = true;
        }
    }
    Ok(out)
}

