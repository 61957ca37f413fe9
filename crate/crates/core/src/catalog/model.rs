use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::gql::{parse_predicate, Predicate};
use crate::value::{CanonicalType, Cast, Ident, Value};

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: Ident,
    #[serde(rename = "type")]
    pub ty: CanonicalType,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub nullable: bool,
}

impl AttributeDef {
    pub fn new(name: impl Into<Ident>, ty: CanonicalType) -> Self {
        AttributeDef { name: name.into(), ty, nullable: true }
    }

    pub fn required(mut self) -> Self {
        self.nullable = false;
        self
    }
}

/// A class of the global schema. It stores no data of its own; its rows are
/// composed from the fragments named by its mapping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualClass {
    pub name: Ident,
    pub attributes: Vec<AttributeDef>,
}

impl VirtualClass {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SiteMode {
    Embedded,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AdapterKind {
    Relational,
    Document,
    Csv,
}

impl AdapterKind {
    pub fn storage_format(self) -> StorageFormat {
        match self {
            AdapterKind::Relational => StorageFormat::SqlTable,
            AdapterKind::Document => StorageFormat::JsonlFile,
            AdapterKind::Csv => StorageFormat::CsvFile,
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdapterKind::Relational => "RELATIONAL",
            AdapterKind::Document => "DOCUMENT",
            AdapterKind::Csv => "CSV",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDescriptor {
    pub id: Ident,
    pub mode: SiteMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub adapter: AdapterKind,
    /// Secret presented by the server when calling this site's agent.
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAttributeDef {
    pub name: Ident,
    #[serde(rename = "type")]
    pub ty: CanonicalType,
    /// Native type name at the site; defaults to the canonical tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native: Option<String>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub nullable: bool,
}

impl LocalAttributeDef {
    pub fn new(name: impl Into<Ident>, ty: CanonicalType) -> Self {
        LocalAttributeDef { name: name.into(), ty, native: None, nullable: true }
    }

    pub fn with_native(mut self, native: &str) -> Self {
        self.native = Some(native.to_string());
        self
    }

    pub fn native_type(&self) -> &str {
        self.native.as_deref().unwrap_or(self.ty.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalClassDef {
    pub name: Ident,
    pub attributes: Vec<LocalAttributeDef>,
}

impl LocalClassDef {
    pub fn attribute(&self, name: &str) -> Option<&LocalAttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StorageFormat {
    SqlTable,
    JsonlFile,
    CsvFile,
}

/// Physical organisation of a site: the format and the directory holding one
/// table/file per local class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageDescriptor {
    pub format: StorageFormat,
    pub location: String,
}

/// Logical schema of one site together with its storage description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSchemaDescriptor {
    pub site: Ident,
    #[serde(default)]
    pub classes: Vec<LocalClassDef>,
    pub storage: StorageDescriptor,
}

impl LocalSchemaDescriptor {
    pub fn class(&self, name: &str) -> Option<&LocalClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }
}

/// Per-attribute transformation from a local attribute into a global one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMap {
    pub local: Ident,
    pub global: Ident,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cast: Option<Cast>,
    /// Used when the local attribute is absent or NULL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
}

impl AttributeMap {
    pub fn new(local: impl Into<Ident>, global: impl Into<Ident>) -> Self {
        AttributeMap { local: local.into(), global: global.into(), cast: None, default: None }
    }

    pub fn with_cast(mut self, cast: Cast) -> Self {
        self.cast = Some(cast);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub site: Ident,
    pub local_class: Ident,
    #[serde(default)]
    pub attr_maps: Vec<AttributeMap>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_predicate",
        deserialize_with = "de_predicate"
    )]
    pub route_when: Option<Predicate>,
}

impl Fragment {
    pub fn map_for_global(&self, global: &str) -> Option<&AttributeMap> {
        self.attr_maps.iter().find(|m| m.global == global)
    }

    pub fn maps_global(&self, global: &str) -> bool {
        self.map_for_global(global).is_some()
    }
}

fn ser_predicate<S: Serializer>(p: &Option<Predicate>, s: S) -> Result<S::Ok, S::Error> {
    match p {
        Some(p) => s.serialize_str(&p.to_string()),
        None => s.serialize_none(),
    }
}

fn de_predicate<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Predicate>, D::Error> {
    let text: Option<String> = Option::deserialize(d)?;
    text.map(|t| parse_predicate(&t).map_err(|e| serde::de::Error::custom(format!("route_when: {e}"))))
        .transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MappingKind {
    Horizontal,
    Vertical,
}

impl fmt::Display for MappingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MappingKind::Horizontal => "HORIZONTAL",
            MappingKind::Vertical => "VERTICAL",
        })
    }
}

/// Global-as-view definition of one virtual class over site fragments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRule {
    pub class: Ident,
    pub kind: MappingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join_key: Option<Ident>,
    pub fragments: Vec<Fragment>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDef {
    pub name: Ident,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(rename = "version_hint", default)]
    pub version: u64,
    #[serde(default)]
    pub classes: Vec<VirtualClass>,
    #[serde(default)]
    pub mappings: Vec<MappingRule>,
    #[serde(default)]
    pub sites: Vec<SiteDescriptor>,
    #[serde(default)]
    pub local_schemas: Vec<LocalSchemaDescriptor>,
    #[serde(default)]
    pub views: Vec<ViewDef>,
    /// Schema-integration declarations, carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<serde_json::Value>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            version: 0,
            classes: Vec::new(),
            mappings: Vec::new(),
            sites: Vec::new(),
            local_schemas: Vec::new(),
            views: Vec::new(),
            pipeline: None,
        }
    }
}

impl Catalog {
    pub fn class(&self, name: &str) -> Option<&VirtualClass> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn site(&self, id: &str) -> Option<&SiteDescriptor> {
        self.sites.iter().find(|s| s.id == id)
    }

    pub fn view(&self, name: &str) -> Option<&ViewDef> {
        self.views.iter().find(|v| v.name == name)
    }

    pub fn mapping(&self, class: &str) -> Option<&MappingRule> {
        self.mappings.iter().find(|m| m.class == class)
    }

    pub fn local_schema(&self, site: &str) -> Option<&LocalSchemaDescriptor> {
        self.local_schemas.iter().find(|l| l.site == site)
    }

    pub fn local_class(&self, site: &str, class: &str) -> Option<&LocalClassDef> {
        self.local_schema(site).and_then(|l| l.class(class))
    }

    /// Canonical JSON rendering of the catalog document.
    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }
}
