use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CanonicalLocalSchema, PipelineError};
use crate::value::{CanonicalType, Cast, Ident};

/// `site.class.attr`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Endpoint {
    pub site: Ident,
    pub class: Ident,
    pub attr: Ident,
}

impl Endpoint {
    pub fn new(site: &str, class: &str, attr: &str) -> Self {
        Endpoint { site: site.into(), class: class.into(), attr: attr.into() }
    }

    pub fn same_class(&self, site: &Ident, class: &Ident) -> bool {
        self.site == *site && self.class == *class
    }

    pub(super) fn resolve<'a>(&self, schemas: &'a [CanonicalLocalSchema]) -> Result<Option<(CanonicalType, bool)>, PipelineError> {
        let class = schemas
            .iter()
            .find(|s| s.site == self.site)
            .and_then(|s| s.class(self.class.as_str()))
            .ok_or_else(|| PipelineError::UnresolvedEndpoint(self.to_string()))?;
        Ok(class.attribute(self.attr.as_str()).map(|a| (a.ty, a.nullable)))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.site, self.class, self.attr)
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split('.').collect::<Vec<_>>().as_slice() {
            [site, class, attr] if [site, class, attr].iter().all(|p| !p.is_empty()) => Ok(Endpoint::new(site, class, attr)),
            _ => Err(format!("endpoint {s:?} is not of the form site.class.attr")),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    SameEntityHorizontal,
    SameEntityVerticalKey,
}

/// An asserted equivalence between two local attributes. A cast on either
/// side converts that side's values before comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub left: Endpoint,
    pub right: Endpoint,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_cast: Option<Cast>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_cast: Option<Cast>,
}

impl Correspondence {
    pub fn cast_for(&self, e: &Endpoint) -> Option<Cast> {
        if self.left == *e {
            self.left_cast
        } else if self.right == *e {
            self.right_cast
        } else {
            None
        }
    }
}

impl fmt::Display for Correspondence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.left, self.right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConflictKind {
    TypeConflict,
    NameCollision,
    MissingCounterpart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub locus: String,
    pub message: String,
    #[serde(skip)]
    pub endpoints: Vec<Endpoint>,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.locus, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub accepted: Vec<Correspondence>,
    pub conflicts: Vec<Conflict>,
}

fn effective(ty: CanonicalType, cast: Option<Cast>) -> Result<CanonicalType, String> {
    match cast {
        None => Ok(ty),
        Some(c) if !c.is_legal() => Err(format!("cast {c} is not in the coercion matrix")),
        Some(c) if c.from != ty => Err(format!("cast {c} applied to a {ty} attribute")),
        Some(c) => Ok(c.to),
    }
}

/// Checks each declared correspondence against the canonical schemas.
pub fn investigate(schemas: &[CanonicalLocalSchema], decls: &[Correspondence]) -> Result<CorrespondenceReport, PipelineError> {
    let mut report = CorrespondenceReport::default();
    let mut candidates: Vec<Correspondence> = Vec::new();
    let same_pair = |a: &Correspondence, b: &Correspondence| {
        (a.left == b.left && a.right == b.right) || (a.left == b.right && a.right == b.left)
    };
    for (i, d) in decls.iter().enumerate() {
        if decls[..i].iter().any(|p| p == d) {
            continue;
        }
        if decls.iter().any(|p| p != d && same_pair(p, d)) {
            report.conflicts.push(Conflict {
                kind: ConflictKind::TypeConflict,
                locus: d.to_string(),
                message: "the same pair is declared more than once with different casts".into(),
                endpoints: vec![d.left.clone(), d.right.clone()],
            });
            continue;
        }
        let locus = d.to_string();
        let conflict = |kind, message: String| Conflict {
            kind,
            locus: locus.clone(),
            message,
            endpoints: vec![d.left.clone(), d.right.clone()],
        };
        let (l, r) = (d.left.resolve(schemas)?, d.right.resolve(schemas)?);
        let (Some((lt, _)), Some((rt, _))) = (l, r) else {
            let missing = if l.is_none() { &d.left } else { &d.right };
            report.conflicts.push(conflict(ConflictKind::MissingCounterpart, format!("{missing} does not exist")));
            continue;
        };
        match (effective(lt, d.left_cast), effective(rt, d.right_cast)) {
            (Ok(a), Ok(b)) if a == b => candidates.push(d.clone()),
            (Ok(a), Ok(b)) => report.conflicts.push(conflict(
                ConflictKind::TypeConflict,
                format!("{a} and {b} differ and no declared cast reconciles them"),
            )),
            (Err(e), _) | (_, Err(e)) => report.conflicts.push(conflict(ConflictKind::TypeConflict, e)),
        }
    }

    // An attribute may correspond to at most one attribute of any other class.
    let mut collided = vec![false; candidates.len()];
    for (i, a) in candidates.iter().enumerate() {
        for (j, b) in candidates.iter().enumerate().skip(i + 1) {
            for (x, y) in [(&a.left, &a.right), (&a.right, &a.left)] {
                for (u, v) in [(&b.left, &b.right), (&b.right, &b.left)] {
                    if x == u && y.same_class(&v.site, &v.class) && y.attr != v.attr {
                        collided[i] = true;
                        collided[j] = true;
                    }
                }
            }
        }
    }
    for (c, bad) in candidates.into_iter().zip(collided) {
        if bad {
            report.conflicts.push(Conflict {
                kind: ConflictKind::NameCollision,
                locus: c.to_string(),
                message: "an attribute corresponds to two attributes of the same class".into(),
                endpoints: vec![c.left.clone(), c.right.clone()],
            });
        } else {
            report.accepted.push(c);
        }
    }
    Ok(report)
}
