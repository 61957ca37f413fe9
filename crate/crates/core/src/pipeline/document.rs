use serde::{Deserialize, Serialize};

use super::integrate::{assemble, integrate, ClassIntent};
use super::investigate::{investigate, Correspondence};
use super::{transform_local_schema, PipelineError, TransformationRuleSet};
use crate::catalog::{load_catalog, validate_catalog, Catalog};
use crate::value::CanonicalType;

/// The `pipeline` section of a catalog document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineSpec {
    #[serde(default)]
    pub transformation_rules: Vec<TransformationRuleSet>,
    #[serde(default)]
    pub correspondences: Vec<Correspondence>,
    #[serde(default)]
    pub intent: Vec<ClassIntent>,
}

/// Local attributes in a declaration document may give only a native type;
/// the canonical type is then filled in by transformation.
fn fill_placeholder_types(doc: &mut serde_json::Value) -> Result<(), PipelineError> {
    let Some(schemas) = doc.get_mut("local_schemas").and_then(|v| v.as_array_mut()) else { return Ok(()) };
    for attr in schemas
        .iter_mut()
        .filter_map(|s| s.get_mut("classes")?.as_array_mut())
        .flatten()
        .filter_map(|c| c.get_mut("attributes")?.as_array_mut())
        .flatten()
    {
        let Some(obj) = attr.as_object_mut() else { continue };
        if obj.contains_key("type") {
            continue;
        }
        if !obj.contains_key("native") {
            let name = obj.get("name").and_then(|n| n.as_str()).unwrap_or("?");
            return Err(PipelineError::InvalidIntent(format!("local attribute {name} has neither type nor native")));
        }
        obj.insert("type".into(), serde_json::Value::String(CanonicalType::String.name().into()));
    }
    Ok(())
}

/// Runs transformation, correspondence investigation and integration over a
/// declaration document and returns the resulting catalog with any warnings.
pub fn run_pipeline(document: &str) -> Result<(Catalog, Vec<String>), PipelineError> {
    let mut doc: serde_json::Value =
        serde_json::from_str(document).map_err(|e| PipelineError::InvalidIntent(format!("line {}: {e}", e.line())))?;
    fill_placeholder_types(&mut doc)?;
    let mut base = load_catalog(&doc.to_string()).map_err(|e| PipelineError::InvalidIntent(e.to_string()))?;
    let spec: PipelineSpec = match &base.pipeline {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| PipelineError::InvalidIntent(format!("pipeline: {e}")))?,
        None => return Err(PipelineError::InvalidIntent("document has no pipeline section".into())),
    };

    let mut canonical = Vec::new();
    for ls in &mut base.local_schemas {
        let rules = spec
            .transformation_rules
            .iter()
            .find(|r| r.site == ls.site)
            .cloned()
            .unwrap_or_else(|| TransformationRuleSet { site: ls.site.clone(), ..Default::default() });
        let cls = transform_local_schema(ls, &rules)?;
        for (lc, cc) in ls.classes.iter_mut().zip(&cls.classes) {
            for (la, ca) in lc.attributes.iter_mut().zip(&cc.attributes) {
                la.ty = ca.ty;
            }
        }
        canonical.push(cls);
    }

    let report = investigate(&canonical, &spec.correspondences)?;
    let out = integrate(&report, &canonical, &spec.intent)?;
    let catalog = assemble(&base, &out);
    let validation = validate_catalog(&catalog);
    if !validation.is_ok() {
        return Err(PipelineError::InvalidCatalog(validation));
    }
    let mut warnings = out.warnings;
    warnings.extend(report.conflicts.iter().map(|c| c.to_string()));
    warnings.extend(validation.warnings().map(|w| w.to_string()));
    Ok((catalog, warnings))
}
