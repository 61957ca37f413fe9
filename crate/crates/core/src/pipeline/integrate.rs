use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::investigate::{Correspondence, CorrespondenceReport, Endpoint};
use super::{CanonicalLocalSchema, PipelineError};
use crate::catalog::{AttributeDef, AttributeMap, Catalog, Fragment, MappingKind, MappingRule, VirtualClass};
use crate::gql::{check_comparison, parse_predicate};
use crate::value::{CanonicalType, Ident, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberIntent {
    pub site: Ident,
    pub local_class: Ident,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_when: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeIntent {
    pub name: Ident,
    /// The local attribute that names and types this global attribute.
    pub anchor: Endpoint,
    #[serde(default = "yes")]
    pub nullable: bool,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<CanonicalType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
}

/// The operator's integration decision for one virtual class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIntent {
    pub name: Ident,
    pub kind: MappingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join_key: Option<Ident>,
    pub members: Vec<MemberIntent>,
    pub attributes: Vec<AttributeIntent>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntegrationOutput {
    pub classes: Vec<VirtualClass>,
    pub mappings: Vec<MappingRule>,
    pub warnings: Vec<String>,
}

/// Endpoints grouped into equivalence classes by accepted correspondences.
struct Components<'a> {
    index: HashMap<&'a Endpoint, usize>,
    order: Vec<&'a Endpoint>,
    parent: Vec<usize>,
}

impl<'a> Components<'a> {
    fn build(accepted: &'a [Correspondence]) -> Self {
        let mut c = Components { index: HashMap::new(), order: Vec::new(), parent: Vec::new() };
        for d in accepted {
            let (a, b) = (c.id(&d.left), c.id(&d.right));
            let (ra, rb) = (c.root(a), c.root(b));
            c.parent[rb] = ra;
        }
        c
    }

    fn id(&mut self, e: &'a Endpoint) -> usize {
        *self.index.entry(e).or_insert_with(|| {
            self.order.push(e);
            self.parent.push(self.parent.len());
            self.parent.len() - 1
        })
    }

    fn root(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    /// First endpoint in declaration order that is equivalent to `e` and lives in the given class.
    fn counterpart(&self, e: &Endpoint, site: &Ident, class: &Ident) -> Option<&'a Endpoint> {
        let r = self.root(*self.index.get(e)?);
        self.order.iter().copied().find(|x| x.same_class(site, class) && self.root(self.index[x]) == r)
    }
}

/// A local name the class does not declare, so the map reads only its default.
fn absent_name(class: &super::CanonicalClass, base: &Ident) -> Ident {
    let mut name = base.to_string();
    while class.attribute(&name).is_some() {
        name.push('_');
    }
    Ident::from(name.as_str())
}

fn declared_cast(accepted: &[Correspondence], e: &Endpoint) -> Option<crate::value::Cast> {
    accepted.iter().find_map(|c| c.cast_for(e))
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::InvalidIntent(msg.into())
}

/// Derives virtual classes and mapping rules from accepted correspondences
/// and the operator's intent.
pub fn integrate(
    report: &CorrespondenceReport,
    schemas: &[CanonicalLocalSchema],
    intent: &[ClassIntent],
) -> Result<IntegrationOutput, PipelineError> {
    let comps = Components::build(&report.accepted);
    let mut out = IntegrationOutput::default();

    for ci in intent {
        if !Ident::is_well_formed(ci.name.as_str()) {
            return Err(invalid(format!("class name {:?} is not an identifier", ci.name.as_str())));
        }
        if ci.members.is_empty() {
            return Err(invalid(format!("class {} has no members", ci.name)));
        }
        let touching: Vec<String> = report
            .conflicts
            .iter()
            .filter(|c| c.endpoints.iter().any(|e| ci.members.iter().any(|m| e.same_class(&m.site, &m.local_class))))
            .map(|c| c.to_string())
            .collect();
        if !touching.is_empty() {
            return Err(PipelineError::ConflictingInput { class: ci.name.to_string(), conflicts: touching });
        }

        // Global attributes: first declaration of a name wins.
        let mut attrs: Vec<&AttributeIntent> = Vec::new();
        for a in &ci.attributes {
            if attrs.iter().any(|x| x.name == a.name) {
                out.warnings.push(format!("NAME_COLLISION: {}.{} declared again (anchor {}); first declaration kept", ci.name, a.name, a.anchor));
            } else {
                attrs.push(a);
            }
        }
        if attrs.is_empty() {
            return Err(invalid(format!("class {} has no attributes", ci.name)));
        }

        let mut defs = Vec::new();
        for a in &attrs {
            if !Ident::is_well_formed(a.name.as_str()) {
                return Err(invalid(format!("attribute name {:?} is not an identifier", a.name.as_str())));
            }
            let (anchor_ty, _) = a.anchor.resolve(schemas)?.ok_or_else(|| PipelineError::UnresolvedEndpoint(a.anchor.to_string()))?;
            let ty = match (a.ty, declared_cast(&report.accepted, &a.anchor)) {
                (Some(t), _) => t,
                (None, Some(cast)) if cast.from == anchor_ty => cast.to,
                (None, _) => anchor_ty,
            };
            if let Some(d) = &a.default {
                if d.coerce_to(ty).is_none() {
                    return Err(invalid(format!("default {} for {}.{} is not a {ty}", d.to_literal(), ci.name, a.name)));
                }
            }
            defs.push(AttributeDef { name: a.name.clone(), ty, nullable: a.nullable });
        }
        let class = VirtualClass { name: ci.name.clone(), attributes: defs };

        let mut fragments = Vec::new();
        for m in &ci.members {
            let member_class = schemas
                .iter()
                .find(|s| s.site == m.site)
                .and_then(|s| s.class(m.local_class.as_str()))
                .ok_or_else(|| PipelineError::UnresolvedEndpoint(format!("{}.{}", m.site, m.local_class)))?;
            let mut attr_maps = Vec::new();
            for (a, def) in attrs.iter().zip(&class.attributes) {
                let local = if a.anchor.same_class(&m.site, &m.local_class) {
                    Some(&a.anchor)
                } else {
                    comps.counterpart(&a.anchor, &m.site, &m.local_class)
                };
                let Some(local) = local else {
                    if let Some(d) = &a.default {
                        if ci.kind == MappingKind::Horizontal {
                            attr_maps.push(AttributeMap {
                                local: absent_name(member_class, &a.name),
                                global: a.name.clone(),
                                cast: None,
                                default: d.coerce_to(def.ty),
                            });
                        }
                    }
                    continue;
                };
                let local_ty = member_class
                    .attribute(local.attr.as_str())
                    .map(|x| x.ty)
                    .ok_or_else(|| PipelineError::UnresolvedEndpoint(local.to_string()))?;
                let cast = if local_ty == def.ty {
                    None
                } else {
                    match declared_cast(&report.accepted, local) {
                        Some(c) if c.from == local_ty && c.to == def.ty => Some(c),
                        _ => {
                            return Err(PipelineError::ConflictingInput {
                                class: ci.name.to_string(),
                                conflicts: vec![format!("{local} is {local_ty} but {}.{} is {} and no cast is declared", ci.name, a.name, def.ty)],
                            })
                        }
                    }
                };
                attr_maps.push(AttributeMap {
                    local: local.attr.clone(),
                    global: a.name.clone(),
                    cast,
                    default: a.default.as_ref().and_then(|d| d.coerce_to(def.ty)),
                });
            }
            let route_when = match (&m.route_when, ci.kind) {
                (None, _) => None,
                (Some(_), MappingKind::Vertical) => return Err(invalid("route_when applies to horizontal classes only")),
                (Some(text), MappingKind::Horizontal) => {
                    let p = parse_predicate(text).map_err(|e| invalid(format!("route_when {text:?}: {e}")))?;
                    for cmp in p.comparisons() {
                        check_comparison(&class, cmp).map_err(|e| invalid(format!("route_when {text:?}: {e}")))?;
                    }
                    Some(p)
                }
            };
            fragments.push(Fragment { site: m.site.clone(), local_class: m.local_class.clone(), attr_maps, route_when });
        }

        let first = schemas
            .iter()
            .find(|s| s.site == ci.members[0].site)
            .and_then(|s| s.class(ci.members[0].local_class.as_str()))
            .expect("member resolved above");
        check_coverage(ci, &class, &mut fragments, &attrs, first)?;
        out.mappings.push(MappingRule {
            class: class.name.clone(),
            kind: ci.kind,
            join_key: ci.join_key.clone(),
            fragments,
            stale: false,
        });
        out.classes.push(class);
    }
    Ok(out)
}

fn check_coverage(
    ci: &ClassIntent,
    class: &VirtualClass,
    fragments: &mut [Fragment],
    attrs: &[&AttributeIntent],
    first: &super::CanonicalClass,
) -> Result<(), PipelineError> {
    let gap = |attr: &Ident, site: &Ident| PipelineError::CoverageGap {
        class: class.name.to_string(),
        attr: attr.to_string(),
        site: site.to_string(),
    };
    match ci.kind {
        MappingKind::Horizontal => {
            for f in fragments.iter() {
                if let Some(a) = class.attributes.iter().find(|a| !a.nullable && !f.maps_global(a.name.as_str())) {
                    return Err(gap(&a.name, &f.site));
                }
            }
        }
        MappingKind::Vertical => {
            let key = ci.join_key.as_ref().ok_or_else(|| invalid(format!("vertical class {} needs a join_key", ci.name)))?;
            if class.attribute(key.as_str()).is_none() {
                return Err(invalid(format!("join_key {key} is not an attribute of {}", ci.name)));
            }
            if let Some(f) = fragments.iter().find(|f| !f.maps_global(key.as_str())) {
                return Err(gap(key, &f.site));
            }
            for (a, def) in attrs.iter().zip(&class.attributes) {
                if fragments.iter().any(|f| f.maps_global(a.name.as_str())) {
                    continue;
                }
                match &a.default {
                    Some(d) => fragments[0].attr_maps.push(AttributeMap {
                        local: absent_name(first, &a.name),
                        global: a.name.clone(),
                        cast: None,
                        default: d.coerce_to(def.ty),
                    }),
                    None => return Err(gap(&a.name, &fragments[0].site)),
                }
            }
        }
    }
    Ok(())
}

/// `base` with its classes and mappings replaced by the integration output.
pub fn assemble(base: &Catalog, out: &IntegrationOutput) -> Catalog {
    Catalog { classes: out.classes.clone(), mappings: out.mappings.clone(), ..base.clone() }
}
