//! Technique registry with four-dimension signatures, the guide filter, and
//! per-operation parameter schemas.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, ParamError, Result};

const BUILTIN: &str = include_str!("../data/registry.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perspective {
    ControlFlow,
    Time,
    Organizational,
    CaseData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiningActivity {
    Discovery,
    Conformance,
    Performance,
    RoleMining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivacyPerspective {
    Case,
    Resource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrivacyActivity {
    #[serde(rename = "PPDP")]
    Ppdp,
    #[serde(rename = "PPPM")]
    Pppm,
    #[serde(rename = "PrAn")]
    PrAn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechniqueSignature {
    pub technique_id: String,
    pub title: String,
    pub pmps: BTreeSet<Perspective>,
    pub pmac: BTreeSet<MiningActivity>,
    pub prps: BTreeSet<PrivacyPerspective>,
    pub prac: BTreeSet<PrivacyActivity>,
    /// Job operations that run this technique.
    pub operations: Vec<String>,
}

/// One optional choice per dimension; `None` matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuideQuery {
    #[serde(default)]
    pub pmps: Option<Perspective>,
    #[serde(default)]
    pub pmac: Option<MiningActivity>,
    #[serde(default)]
    pub prps: Option<PrivacyPerspective>,
    #[serde(default)]
    pub prac: Option<PrivacyActivity>,
}

impl GuideQuery {
    fn admits(&self, s: &TechniqueSignature) -> bool {
        self.pmps.is_none_or(|v| s.pmps.contains(&v))
            && self.pmac.is_none_or(|v| s.pmac.contains(&v))
            && self.prps.is_none_or(|v| s.prps.contains(&v))
            && self.prac.is_none_or(|v| s.prac.contains(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Enum,
    StringList,
    Selector,
    Mapping,
    Taxonomy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ParamType,
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exclusive_min: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub help: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSchema {
    pub operation: String,
    pub technique_id: String,
    /// Kind of the stored output entry: `xes` or `ela`.
    pub output: String,
    pub parameters: Vec<ParamSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub techniques: Vec<TechniqueSignature>,
    pub operations: Vec<OperationSchema>,
}

impl Registry {
    pub fn from_json(raw: &str) -> Result<Registry> {
        let registry: Registry =
            serde_json::from_str(raw).map_err(|e| Error::InvalidOperation(format!("registry: {e}")))?;
        registry.check()?;
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<Registry> {
        Registry::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> &'static Registry {
        static REGISTRY: OnceLock<Registry> = OnceLock::new();
        REGISTRY.get_or_init(|| Registry::from_json(BUILTIN).expect("shipped registry is valid"))
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidOperation(format!("registry: {m}")));
        for t in &self.techniques {
            if t.pmps.is_empty() || t.pmac.is_empty() || t.prps.is_empty() || t.prac.is_empty() {
                return bad(format!("technique `{}` has an empty dimension", t.technique_id));
            }
        }
        for op in &self.operations {
            if !self.techniques.iter().any(|t| t.technique_id == op.technique_id) {
                return bad(format!("operation `{}` names unknown technique", op.operation));
            }
            if op.output != "xes" && op.output != "ela" {
                return bad(format!("operation `{}` has unknown output kind", op.operation));
            }
        }
        Ok(())
    }

    /// Technique ids admitted by the query, in registry order.
    pub fn filter(&self, query: &GuideQuery) -> Vec<String> {
        self.techniques
            .iter()
            .filter(|t| query.admits(t))
            .map(|t| t.technique_id.clone())
            .collect()
    }

    pub fn operation(&self, name: &str) -> Option<&OperationSchema> {
        self.operations.iter().find(|o| o.operation == name)
    }

    /// Checks a parameter document against an operation's schema and fills in
    /// defaults. Every problem is reported, one entry per parameter.
    pub fn validate_params(&self, operation: &str, params: &Map<String, Value>) -> Result<Map<String, Value>> {
        let schema = self
            .operation(operation)
            .ok_or_else(|| Error::UnknownTechnique(operation.to_owned()))?;
        let mut errors = Vec::new();
        for key in params.keys() {
            if !schema.parameters.iter().any(|p| &p.name == key) {
                errors.push(ParamError::new(key.clone(), "unknown parameter"));
            }
        }
        let mut out = Map::new();
        for p in &schema.parameters {
            match params.get(&p.name).filter(|v| !v.is_null()) {
                Some(v) => match check_value(p, v) {
                    Ok(()) => {
                        out.insert(p.name.clone(), v.clone());
                    }
                    Err(msg) => errors.push(ParamError::new(p.name.clone(), format!("{msg}. {}", p.help))),
                },
                None if p.required => errors.push(ParamError::new(p.name.clone(), format!("required. {}", p.help))),
                None => {
                    if let Some(d) = &p.default {
                        out.insert(p.name.clone(), d.clone());
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(Error::ParameterValidation(errors))
        }
    }
}

fn check_value(p: &ParamSchema, v: &Value) -> std::result::Result<(), String> {
    let number = match p.kind {
        ParamType::String => {
            return match v.as_str() {
                Some(s) if !s.is_empty() => Ok(()),
                _ => Err("expected a non-empty string".into()),
            }
        }
        ParamType::Boolean => return v.as_bool().map(|_| ()).ok_or_else(|| "expected true or false".into()),
        ParamType::Enum => {
            let allowed = p.values.as_deref().unwrap_or_default();
            return match v.as_str() {
                Some(s) if allowed.iter().any(|a| a == s) => Ok(()),
                _ => Err(format!("expected one of {}", allowed.join(", "))),
            };
        }
        ParamType::StringList => {
            return match v.as_array() {
                Some(items) if !items.is_empty() && items.iter().all(|i| i.as_str().is_some_and(|s| !s.is_empty())) => Ok(()),
                _ => Err("expected a non-empty list of strings".into()),
            }
        }
        ParamType::Selector | ParamType::Mapping => {
            return if v.is_object() || v.is_array() {
                Ok(())
            } else {
                Err("expected an object".into())
            }
        }
        ParamType::Taxonomy => {
            return if v.is_string() || v.is_array() {
                Ok(())
            } else {
                Err("expected CSV text or a list of [child, parent] pairs".into())
            }
        }
        ParamType::Integer => match v.as_i64() {
            Some(i) => i as f64,
            None => return Err("expected an integer".into()),
        },
        ParamType::Number => match v.as_f64() {
            Some(x) => x,
            None => return Err("expected a number".into()),
        },
    };
    if let Some(min) = p.min {
        if p.exclusive_min && number <= min {
            return Err(format!("must be greater than {min}"));
        }
        if number < min {
            return Err(format!("must be at least {min}"));
        }
    }
    if let Some(max) = p.max {
        if number > max {
            return Err(format!("must be at most {max}"));
        }
    }
    Ok(())
}

/// The built-in technique table.
pub fn registry() -> &'static [TechniqueSignature] {
    &Registry::builtin().techniques
}

pub fn filter(query: &GuideQuery) -> Vec<String> {
    Registry::builtin().filter(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn six_techniques() {
        assert_eq!(registry().len(), 6);
        let connector = registry().iter().find(|t| t.technique_id == "connector-dfg").unwrap();
        assert_eq!(connector.pmac, BTreeSet::from([MiningActivity::Discovery]));
        let roles = registry().iter().find(|t| t.technique_id == "role-miner").unwrap();
        assert_eq!(roles.prps, BTreeSet::from([PrivacyPerspective::Resource]));
    }

    #[test]
    fn guide_filters() {
        assert_eq!(filter(&GuideQuery::default()).len(), 6);
        let q = GuideQuery {
            pmac: Some(MiningActivity::RoleMining),
            ..Default::default()
        };
        assert_eq!(filter(&q), vec!["role-miner", "anon-ops", "privacy-analysis"]);
        let q = GuideQuery {
            prac: Some(PrivacyActivity::PrAn),
            ..Default::default()
        };
        assert_eq!(filter(&q), vec!["privacy-analysis"]);
    }

    #[test]
    fn query_wire_format() {
        let q: GuideQuery = serde_json::from_value(json!({"pmac": "role-mining", "prac": "PPDP"})).unwrap();
        assert_eq!(q.pmac, Some(MiningActivity::RoleMining));
        assert!(serde_json::from_value::<GuideQuery>(json!({"pmac": "juggling"})).is_err());
    }

    #[test]
    fn every_operation_is_listed_under_its_technique() {
        let reg = Registry::builtin();
        for op in &reg.operations {
            let t = reg.techniques.iter().find(|t| t.technique_id == op.technique_id).unwrap();
            assert!(t.operations.contains(&op.operation), "{}", op.operation);
        }
    }

    #[test]
    fn parameter_validation() {
        let reg = Registry::builtin();
        let p = json!({"epsilon": 0.0, "colour": "red"});
        match reg.validate_params("dp_publish", p.as_object().unwrap()) {
            Err(Error::ParameterValidation(errs)) => {
                let names: Vec<&str> = errs.iter().map(|e| e.param.as_str()).collect();
                assert_eq!(names, vec!["colour", "epsilon"]);
                assert!(errs[1].message.contains("greater than 0"));
            }
            other => panic!("{other:?}"),
        }
        let ok = reg
            .validate_params("dp_publish", json!({"epsilon": 1.0}).as_object().unwrap())
            .unwrap();
        assert_eq!(ok["max_variant_length"], json!(64));
        assert!(matches!(
            reg.validate_params("juggle", &Map::new()),
            Err(Error::UnknownTechnique(_))
        ));
    }
}
