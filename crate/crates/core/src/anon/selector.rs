use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{AttrRef, Event, EventLog, Trace, TypedValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorLevel {
    Event,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
}

impl Comparator {
    pub fn parse(raw: &str) -> Option<Comparator> {
        Some(match raw {
            "=" | "==" | "eq" => Comparator::Eq,
            "!=" | "≠" | "ne" => Comparator::Ne,
            "<" | "lt" => Comparator::Lt,
            "<=" | "≤" | "le" => Comparator::Le,
            ">" | "gt" => Comparator::Gt,
            ">=" | "≥" | "ge" => Comparator::Ge,
            "in" => Comparator::In,
            _ => return None,
        })
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::In => "in",
        }
    }
}

/// One comparison `key comparator operand`. `In` takes a set of operands,
/// every other comparator exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub key: String,
    pub comparator: Comparator,
    pub operands: Vec<TypedValue>,
}

impl Atom {
    pub fn new(key: impl Into<String>, comparator: Comparator, operand: TypedValue) -> Self {
        Atom {
            key: key.into(),
            comparator,
            operands: vec![operand],
        }
    }

    pub fn eq(key: impl Into<String>, operand: TypedValue) -> Self {
        Atom::new(key, Comparator::Eq, operand)
    }

    pub fn in_set(key: impl Into<String>, operands: Vec<TypedValue>) -> Self {
        Atom {
            key: key.into(),
            comparator: Comparator::In,
            operands,
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.comparator != Comparator::In && self.operands.len() != 1 {
            return Err(Error::InvalidOperation(format!(
                "comparator `{}` on `{}` takes exactly one operand",
                self.comparator.symbol(),
                self.key
            )));
        }
        Ok(())
    }

    fn holds(&self, value: Option<&TypedValue>) -> Result<bool> {
        let Some(value) = value else {
            return Ok(false);
        };
        let mismatch = |operand: &TypedValue| {
            Error::type_mismatch(
                &self.key,
                format!("cannot compare {} with {}", value.kind(), operand.kind()),
            )
        };
        let cmp = |operand: &TypedValue| value.partial_cmp_typed(operand).ok_or_else(|| mismatch(operand));
        Ok(match self.comparator {
            Comparator::Eq => cmp(&self.operands[0])? == Ordering::Equal,
            Comparator::Ne => cmp(&self.operands[0])? != Ordering::Equal,
            Comparator::Lt => cmp(&self.operands[0])? == Ordering::Less,
            Comparator::Le => cmp(&self.operands[0])? != Ordering::Greater,
            Comparator::Gt => cmp(&self.operands[0])? == Ordering::Greater,
            Comparator::Ge => cmp(&self.operands[0])? != Ordering::Less,
            Comparator::In => {
                let mut found = false;
                for operand in &self.operands {
                    found |= cmp(operand)? == Ordering::Equal;
                }
                found
            }
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let operands: Vec<String> = self
            .operands
            .iter()
            .map(|v| format!("{}:{}", v.kind(), v))
            .collect();
        write!(f, "{} {} [{}]", self.key, self.comparator.symbol(), operands.join(","))
    }
}

/// Conjunction of atoms evaluated on events or on traces.
///
/// At trace level an atom over an event attribute holds when some event of
/// the trace satisfies it.
#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    pub level: SelectorLevel,
    pub atoms: Vec<Atom>,
}

pub(crate) struct BoundSelector<'s> {
    level: SelectorLevel,
    atoms: Vec<(&'s Atom, AttrRef)>,
}

impl Selector {
    pub fn events(atoms: Vec<Atom>) -> Self {
        Selector {
            level: SelectorLevel::Event,
            atoms,
        }
    }

    pub fn traces(atoms: Vec<Atom>) -> Self {
        Selector {
            level: SelectorLevel::Trace,
            atoms,
        }
    }

    /// Resolves every atom's attribute against the log.
    pub(crate) fn bind(&self, log: &EventLog) -> Result<BoundSelector<'_>> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                a.check_shape()?;
                Ok((a, log.resolve(&a.key)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundSelector {
            level: self.level,
            atoms,
        })
    }

    pub(crate) fn describe(&self) -> String {
        let atoms: Vec<String> = self.atoms.iter().map(ToString::to_string).collect();
        format!("{:?}:{}", self.level, atoms.join(" & "))
    }
}

impl BoundSelector<'_> {
    pub(crate) fn level(&self) -> SelectorLevel {
        self.level
    }

    pub(crate) fn keys(&self) -> impl Iterator<Item = String> + '_ {
        self.atoms.iter().map(|(_, r)| r.qualified())
    }

    pub(crate) fn matches_event(&self, trace: &Trace, event: &Event) -> Result<bool> {
        for (atom, target) in &self.atoms {
            let value = match target {
                AttrRef::Event(key) => event.get(key),
                AttrRef::Trace(key) => trace.get(key),
            };
            if !atom.holds(value.as_deref())? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub(crate) fn matches_trace(&self, trace: &Trace) -> Result<bool> {
        for (atom, target) in &self.atoms {
            let holds = match target {
                AttrRef::Trace(key) => atom.holds(trace.get(key).as_deref())?,
                AttrRef::Event(key) => {
                    let mut any = false;
                    for event in &trace.events {
                        if atom.holds(event.get(key).as_deref())? {
                            any = true;
                            break;
                        }
                    }
                    any
                }
            };
            if !holds {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fix1;

    #[test]
    fn event_atoms() {
        let log = fix1();
        let sel = Selector::events(vec![Atom::eq("concept:name", TypedValue::string("d"))]);
        let bound = sel.bind(&log).unwrap();
        let hits: usize = log
            .traces
            .iter()
            .flat_map(|t| t.events.iter().map(move |e| (t, e)))
            .filter(|(t, e)| bound.matches_event(t, e).unwrap())
            .count();
        assert_eq!(hits, 1);
    }

    #[test]
    fn trace_level_is_existential_over_events() {
        let log = fix1();
        let sel = Selector::traces(vec![Atom::in_set(
            "concept:name",
            vec![TypedValue::string("c"), TypedValue::string("zzz")],
        )]);
        let bound = sel.bind(&log).unwrap();
        let hits: Vec<&str> = log
            .traces
            .iter()
            .filter(|t| bound.matches_trace(t).unwrap())
            .map(|t| t.case_id.as_str())
            .collect();
        assert_eq!(hits, vec!["c1", "c2"]);
    }

    #[test]
    fn ordering_on_timestamps() {
        let log = fix1();
        let cutoff = crate::model::parse_timestamp("2021-06-10T11:00:00Z").unwrap();
        let sel = Selector::events(vec![Atom::new("time:timestamp", Comparator::Ge, TypedValue::Datetime(cutoff))]);
        let bound = sel.bind(&log).unwrap();
        let t = &log.traces[0];
        let flags: Vec<bool> = t.events.iter().map(|e| bound.matches_event(t, e).unwrap()).collect();
        assert_eq!(flags, vec![false, true, true]);
    }

    #[test]
    fn comparator_type_check() {
        let log = fix1();
        let sel = Selector::events(vec![Atom::new("concept:name", Comparator::Lt, TypedValue::Integer(3))]);
        let bound = sel.bind(&log).unwrap();
        let t = &log.traces[0];
        assert!(matches!(bound.matches_event(t, &t.events[0]), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn unknown_keys_fail_to_bind() {
        let sel = Selector::events(vec![Atom::eq("color", TypedValue::string("red"))]);
        assert!(matches!(sel.bind(&fix1()), Err(Error::UnknownAttribute(_))));
    }
}
