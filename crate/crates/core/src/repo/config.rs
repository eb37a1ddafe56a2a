//! Typed operation configurations built from validated parameter documents.

use serde_json::{Map, Value};

use crate::anon::{
    self, Atom, Comparator, CondenseGrouping, GeneralizationScheme, KeyMode, KeySpec, NoiseGenerator, OnMissing,
    Selector, SelectorLevel, SuppressTarget, SwapScope, Taxonomy,
};
use crate::connector;
use crate::dp::{dp_publish, DpParams};
use crate::ela::{write_ela, EventLogAbstraction};
use crate::error::{Error, ParamError, Result};
use crate::group_privacy::{enforce, TlkcParams};
use crate::guidance::Registry;
use crate::knowledge::KnowledgeKind;
use crate::metadata::OpContext;
use crate::model::{parse_timestamp, EventLog, Granularity, TypedValue, ValueKind};
use crate::roles::privacy_aware_roles;
use crate::xes::write_xes;

use super::keys::KeyStore;
use super::EntryKind;

/// A job operation with its parameters parsed and its key material resolved.
#[derive(Debug, Clone)]
pub enum OpConfig {
    Suppress { selector: Selector, target: SuppressTarget },
    AddNoise { count: usize, generator: NoiseGenerator },
    Substitute { attribute: String, mapping: Vec<(TypedValue, TypedValue)>, on_missing: OnMissing },
    Condense { attribute: String, grouping: CondenseGrouping },
    Swap { attribute: String, scope: SwapScope },
    Generalize { attribute: String, scheme: GeneralizationScheme },
    Pseudonymize { attributes: Vec<String>, key: KeySpec },
    DePseudonymize { key: KeySpec },
    Tlkc { params: TlkcParams, kind: KnowledgeKind },
    DpPublish { params: DpParams },
    ConnectorEncode { key: KeySpec },
    RoleMining { noise_bound: u64, threshold: f64 },
}

pub(crate) struct Output {
    pub kind: EntryKind,
    pub bytes: Vec<u8>,
    pub report: Option<Value>,
}

fn invalid(param: &str, message: impl Into<String>) -> Error {
    Error::ParameterValidation(vec![ParamError::new(param, message)])
}

fn text<'a>(params: &'a Map<String, Value>, name: &str) -> &'a str {
    params.get(name).and_then(Value::as_str).unwrap_or_default()
}

fn opt_text<'a>(params: &'a Map<String, Value>, name: &str) -> Option<&'a str> {
    params.get(name).and_then(Value::as_str)
}

fn strings(params: &Map<String, Value>, name: &str) -> Vec<String> {
    params
        .get(name)
        .and_then(Value::as_array)
        .map(|items| items.iter().filter_map(|v| v.as_str().map(str::to_owned)).collect())
        .unwrap_or_default()
}

/// JSON scalars map to their natural kind; `{"kind": ..., "value": ...}`
/// names the kind explicitly.
pub fn typed_from_json(value: &Value) -> std::result::Result<TypedValue, String> {
    match value {
        Value::String(s) => Ok(TypedValue::String(s.clone())),
        Value::Bool(b) => Ok(TypedValue::Boolean(*b)),
        Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(TypedValue::Integer(i)),
            None => Ok(TypedValue::Real(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::Object(obj) => {
            let kind = obj
                .get("kind")
                .and_then(Value::as_str)
                .and_then(ValueKind::parse)
                .ok_or("typed value needs a known `kind`")?;
            let raw = obj.get("value").ok_or("typed value needs a `value`")?;
            let as_text = raw.as_str().map(str::to_owned).unwrap_or_else(|| raw.to_string());
            match kind {
                ValueKind::String => Ok(TypedValue::String(as_text)),
                ValueKind::Id => Ok(TypedValue::Id(as_text)),
                ValueKind::Integer => as_text.parse().map(TypedValue::Integer).map_err(|_| format!("`{as_text}` is not an integer")),
                ValueKind::Real => as_text.parse().map(TypedValue::Real).map_err(|_| format!("`{as_text}` is not a number")),
                ValueKind::Boolean => as_text.parse().map(TypedValue::Boolean).map_err(|_| format!("`{as_text}` is not a boolean")),
                ValueKind::Datetime => parse_timestamp(&as_text)
                    .map(TypedValue::Datetime)
                    .ok_or_else(|| format!("`{as_text}` is not a timestamp")),
                ValueKind::List | ValueKind::Container => Err("list and container values cannot be given here".into()),
            }
        }
        _ => Err(format!("unsupported value {value}")),
    }
}

pub fn selector_from_json(value: &Value) -> std::result::Result<Selector, String> {
    let obj = value.as_object().ok_or("selector must be an object")?;
    let level = match obj.get("level").and_then(Value::as_str).unwrap_or("event") {
        "event" => SelectorLevel::Event,
        "trace" => SelectorLevel::Trace,
        other => return Err(format!("unknown selector level `{other}`")),
    };
    let mut atoms = Vec::new();
    for atom in obj.get("atoms").and_then(Value::as_array).map(Vec::as_slice).unwrap_or_default() {
        let key = atom.get("key").and_then(Value::as_str).ok_or("every atom needs a `key`")?;
        let op = atom.get("op").and_then(Value::as_str).unwrap_or("=");
        let comparator = Comparator::parse(op).ok_or_else(|| format!("unknown comparator `{op}`"))?;
        let operands = match (comparator, atom.get("values"), atom.get("value")) {
            (Comparator::In, Some(Value::Array(vs)), _) => vs.iter().map(typed_from_json).collect::<std::result::Result<_, _>>()?,
            (Comparator::In, _, _) => return Err("`in` needs a `values` list".into()),
            (_, _, Some(v)) => vec![typed_from_json(v)?],
            _ => return Err(format!("atom on `{key}` needs a `value`")),
        };
        atoms.push(Atom {
            key: key.to_owned(),
            comparator,
            operands,
        });
    }
    Ok(Selector { level, atoms })
}

fn mapping_from_json(value: &Value) -> std::result::Result<Vec<(TypedValue, TypedValue)>, String> {
    match value {
        Value::Object(obj) => Ok(obj
            .iter()
            .map(|(k, v)| Ok((TypedValue::String(k.clone()), typed_from_json(v)?)))
            .collect::<std::result::Result<_, String>>()?),
        Value::Array(pairs) => pairs
            .iter()
            .map(|pair| match pair.as_array().map(Vec::as_slice) {
                Some([from, to]) => Ok((typed_from_json(from)?, typed_from_json(to)?)),
                _ => Err("mapping pairs must be [old, new]".to_owned()),
            })
            .collect(),
        _ => Err("mapping must be an object or a list of pairs".into()),
    }
}

fn taxonomy_from_json(value: &Value) -> Result<Taxonomy> {
    match value {
        Value::String(csv) => Taxonomy::from_csv(csv.as_bytes()),
        Value::Array(pairs) => {
            let mut edges = Vec::new();
            for pair in pairs {
                match pair.as_array().map(Vec::as_slice) {
                    Some([Value::String(c), Value::String(p)]) => edges.push((c.clone(), p.clone())),
                    _ => return Err(Error::InvalidTaxonomy("edges must be [child, parent] string pairs".into())),
                }
            }
            Taxonomy::new(edges)
        }
        _ => Err(Error::InvalidTaxonomy("expected CSV text or a list of pairs".into())),
    }
}

fn key_for(keys: &dyn KeyStore, key_ref: &str, mode: KeyMode) -> Result<KeySpec> {
    keys.key(key_ref, mode).map_err(|e| invalid("key_ref", e.to_string()))
}

impl OpConfig {
    /// Validates `params` against the registry schema for `operation` and
    /// parses them. `seed` feeds the seeded operations.
    pub fn parse(
        registry: &Registry,
        operation: &str,
        params: &Map<String, Value>,
        seed: u64,
        keys: &dyn KeyStore,
    ) -> Result<OpConfig> {
        let p = registry.validate_params(operation, params)?;
        let attribute = || text(&p, "attribute").to_owned();
        Ok(match operation {
            "suppress" => {
                let selector = selector_from_json(&p["selector"]).map_err(|m| invalid("selector", m))?;
                let target = match p.get("attributes") {
                    Some(_) => SuppressTarget::Attributes(strings(&p, "attributes")),
                    None => SuppressTarget::WholeMatch,
                };
                OpConfig::Suppress { selector, target }
            }
            "add_noise" => OpConfig::AddNoise {
                count: p["count"].as_u64().unwrap_or_default() as usize,
                generator: NoiseGenerator::parse(text(&p, "generator")).expect("schema enum"),
            },
            "substitute" => OpConfig::Substitute {
                attribute: attribute(),
                mapping: mapping_from_json(&p["mapping"]).map_err(|m| invalid("mapping", m))?,
                on_missing: if text(&p, "on_missing") == "error" { OnMissing::Error } else { OnMissing::Keep },
            },
            "condense" => OpConfig::Condense {
                attribute: attribute(),
                grouping: CondenseGrouping::ByVariant,
            },
            "swap" => OpConfig::Swap {
                attribute: attribute(),
                scope: SwapScope::parse(text(&p, "scope")).expect("schema enum"),
            },
            "generalize" => {
                let scheme = match (opt_text(&p, "granularity"), p.get("taxonomy")) {
                    (Some(g), None) => GeneralizationScheme::Timestamp(Granularity::parse(g).expect("schema enum")),
                    (None, Some(t)) => {
                        GeneralizationScheme::Taxonomy(taxonomy_from_json(t).map_err(|e| invalid("taxonomy", e.to_string()))?)
                    }
                    _ => return Err(invalid("granularity", "give exactly one of granularity or taxonomy")),
                };
                OpConfig::Generalize {
                    attribute: attribute(),
                    scheme,
                }
            }
            "pseudonymize" => OpConfig::Pseudonymize {
                attributes: strings(&p, "attributes"),
                key: key_for(keys, text(&p, "key_ref"), KeyMode::parse(text(&p, "mode")).expect("schema enum"))?,
            },
            "de_pseudonymize" => OpConfig::DePseudonymize {
                key: key_for(keys, text(&p, "key_ref"), KeyMode::EncryptRecoverable)?,
            },
            "tlkc" => {
                let t = match text(&p, "t") {
                    "none" => None,
                    g => Some(Granularity::parse(g).expect("schema enum")),
                };
                let params = TlkcParams {
                    t,
                    l: p["l"].as_u64().unwrap_or_default() as usize,
                    k: p["k"].as_u64().unwrap_or_default() as usize,
                    c: p["c"].as_f64().unwrap_or(1.0),
                    sensitive_attribute: opt_text(&p, "sensitive_attribute").map(str::to_owned),
                };
                params.validate()?;
                OpConfig::Tlkc {
                    params,
                    kind: KnowledgeKind::parse(text(&p, "knowledge_kind")).expect("schema enum"),
                }
            }
            "dp_publish" => {
                let params = DpParams {
                    epsilon: p["epsilon"].as_f64().unwrap_or_default(),
                    prune_threshold: p["prune_threshold"].as_f64().unwrap_or_default(),
                    max_variant_length: p["max_variant_length"].as_u64().unwrap_or_default() as usize,
                    seed,
                    secure_random: p["secure_random"].as_bool().unwrap_or_default(),
                };
                params.validate()?;
                OpConfig::DpPublish { params }
            }
            "connector_encode" => OpConfig::ConnectorEncode {
                key: key_for(keys, text(&p, "key_ref"), KeyMode::PseudonymizeDeterministic)?,
            },
            "role_mining" => OpConfig::RoleMining {
                noise_bound: p["noise_bound"].as_u64().unwrap_or_default(),
                threshold: p["threshold"].as_f64().unwrap_or(0.5),
            },
            other => return Err(Error::UnknownTechnique(other.to_owned())),
        })
    }

    pub(crate) fn apply(&self, log: &EventLog, seed: u64, ctx: &OpContext) -> Result<Output> {
        let xes = |log: EventLog| Output {
            kind: EntryKind::Xes,
            bytes: write_xes(&log),
            report: None,
        };
        let ela = |ela: EventLogAbstraction, report: Option<Value>| Output {
            kind: EntryKind::Ela,
            bytes: write_ela(&ela),
            report,
        };
        Ok(match self {
            OpConfig::Suppress { selector, target } => xes(anon::suppress(log, selector, target, ctx)?),
            OpConfig::AddNoise { count, generator } => xes(anon::add_noise(log, *count, *generator, seed, ctx)?),
            OpConfig::Substitute {
                attribute,
                mapping,
                on_missing,
            } => xes(anon::substitute(log, attribute, mapping, *on_missing, ctx)?),
            OpConfig::Condense { attribute, grouping } => xes(anon::condense(log, attribute, *grouping, ctx)?),
            OpConfig::Swap { attribute, scope } => xes(anon::swap(log, attribute, *scope, seed, ctx)?),
            OpConfig::Generalize { attribute, scheme } => xes(anon::generalize(log, attribute, scheme, ctx)?),
            OpConfig::Pseudonymize { attributes, key } => xes(anon::pseudonymize(log, attributes, key, ctx)?),
            OpConfig::DePseudonymize { key } => xes(anon::de_pseudonymize(log, key)?),
            OpConfig::Tlkc { params, kind } => xes(enforce(log, params, *kind, seed, ctx)?),
            OpConfig::DpPublish { params } => xes(dp_publish(log, params, ctx)?),
            OpConfig::ConnectorEncode { key } => ela(connector::encode(log, key, ctx)?, None),
            OpConfig::RoleMining { noise_bound, threshold } => {
                let (roles, abstraction) = privacy_aware_roles(log, *noise_bound, *threshold, seed, ctx)?;
                let report = serde_json::to_value(&roles).expect("role sets serialize");
                ela(abstraction, Some(report))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repo::keys::MemoryKeyStore;
    use serde_json::json;

    fn parse(op: &str, params: Value) -> Result<OpConfig> {
        let keys = MemoryKeyStore::new().with("demo", b"0123456789abcdef".to_vec());
        OpConfig::parse(Registry::builtin(), op, params.as_object().unwrap(), 1, &keys)
    }

    #[test]
    fn typed_values() {
        assert_eq!(typed_from_json(&json!("x")).unwrap(), TypedValue::string("x"));
        assert_eq!(typed_from_json(&json!(3)).unwrap(), TypedValue::Integer(3));
        assert_eq!(typed_from_json(&json!(2.5)).unwrap(), TypedValue::Real(2.5));
        assert_eq!(
            typed_from_json(&json!({"kind": "datetime", "value": "2021-06-10T10:00:00Z"})).unwrap(),
            TypedValue::Datetime(parse_timestamp("2021-06-10T10:00:00Z").unwrap())
        );
        assert!(typed_from_json(&json!({"kind": "integer", "value": "x"})).is_err());
    }

    #[test]
    fn suppress_config() {
        let cfg = parse(
            "suppress",
            json!({"selector": {"level": "event", "atoms": [{"key": "concept:name", "op": "=", "value": "d"}]}}),
        )
        .unwrap();
        match cfg {
            OpConfig::Suppress { selector, target } => {
                assert_eq!(selector.atoms.len(), 1);
                assert_eq!(target, SuppressTarget::WholeMatch);
            }
            other => panic!("{other:?}"),
        }
        let bad = parse("suppress", json!({"selector": {"atoms": [{"key": "x", "op": "~", "value": 1}]}}));
        assert!(matches!(bad, Err(Error::ParameterValidation(e)) if e[0].param == "selector"));
    }

    #[test]
    fn generalize_needs_one_scheme() {
        assert!(parse("generalize", json!({"attribute": "time:timestamp", "granularity": "day"})).is_ok());
        assert!(parse("generalize", json!({"attribute": "concept:name", "taxonomy": [["b", "x"], ["c", "x"]]})).is_ok());
        assert!(parse("generalize", json!({"attribute": "concept:name"})).is_err());
    }

    #[test]
    fn keys_are_resolved_by_reference() {
        assert!(parse("pseudonymize", json!({"attributes": ["org:resource"], "key_ref": "demo"})).is_ok());
        let missing = parse("connector_encode", json!({"key_ref": "nope"}));
        assert!(matches!(missing, Err(Error::ParameterValidation(e)) if e[0].param == "key_ref"));
        // secrets cannot be smuggled in as parameters
        assert!(parse("connector_encode", json!({"key_ref": "demo", "secret": "abc"})).is_err());
    }

    #[test]
    fn dp_epsilon_checked() {
        assert!(matches!(parse("dp_publish", json!({"epsilon": -1})), Err(Error::ParameterValidation(_))));
        assert!(parse("dp_publish", json!({"epsilon": 0.5})).is_ok());
    }
}
