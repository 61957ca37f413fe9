use serde::Serialize;

use super::plan::{DecompositionPlan, SubQuery, SubWrite, WritePlan};
use crate::value::Ident;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainedSubQuery {
    pub site: Ident,
    pub purpose: String,
    pub local_text: String,
}

/// Deterministic rendering of a plan: the same plan always yields the same document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainDoc {
    pub statement: String,
    pub catalog_version: u64,
    pub subqueries: Vec<ExplainedSubQuery>,
    pub composition: serde_json::Value,
}

impl ExplainDoc {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("explain document serializes")
    }
}

/// `translate` renders a sub-query in the target site's native language.
pub fn explain(plan: &DecompositionPlan, translate: &dyn Fn(&SubQuery) -> String) -> ExplainDoc {
    ExplainDoc {
        statement: plan.statement.clone(),
        catalog_version: plan.catalog_version,
        subqueries: plan
            .subqueries
            .iter()
            .map(|sq| ExplainedSubQuery { site: sq.site.clone(), purpose: sq.purpose.to_string(), local_text: translate(sq) })
            .collect(),
        composition: serde_json::to_value(&plan.composition).expect("composition serializes"),
    }
}

pub fn explain_write(plan: &WritePlan, translate: &dyn Fn(&SubWrite) -> String) -> ExplainDoc {
    ExplainDoc {
        statement: plan.statement.clone(),
        catalog_version: plan.catalog_version,
        subqueries: plan
            .subwrites
            .iter()
            .map(|sw| ExplainedSubQuery {
                site: sw.site.clone(),
                purpose: "WRITE".to_string(),
                local_text: translate(sw),
            })
            .collect(),
        composition: serde_json::Value::Null,
    }
}
