//! Role mining over resource-activity supports, with count perturbation that
//! leaves the supports, and therefore the roles, unchanged.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ela::{AbstractionHeader, Column, EventLogAbstraction};
use crate::error::{Error, ParamError, Result};
use crate::metadata::{parameter_digest, Level, OpContext, OperationKind, RecordFields};
use crate::model::{EventLog, TypedValue, ValueKind, ACTIVITY_KEY, RESOURCE_KEY};
use crate::rng::stream_for;
use crate::xes::log_id;

pub const ABSTRACTION_KIND: &str = "resource-activity-matrix";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceActivityMatrix {
    pub resources: Vec<String>,
    pub activities: Vec<String>,
    /// `counts[r][a]`, indexed like `resources` and `activities`.
    pub counts: Vec<Vec<u64>>,
}

impl ResourceActivityMatrix {
    pub fn support(&self, r: usize) -> BTreeSet<usize> {
        self.counts[r]
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn get(&self, resource: &str, activity: &str) -> Option<u64> {
        let r = self.resources.iter().position(|x| x == resource)?;
        let a = self.activities.iter().position(|x| x == activity)?;
        Some(self.counts[r][a])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub role_id: String,
    pub members: Vec<String>,
    pub profile: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSet {
    pub roles: Vec<Role>,
}

/// Counts events per (resource, activity). Rows and columns are sorted;
/// columns cover the whole alphabet of the log.
pub fn build_matrix(log: &EventLog) -> Result<ResourceActivityMatrix> {
    let cells: BTreeMap<(String, String), u64> = log
        .traces
        .par_iter()
        .fold(BTreeMap::new, |mut acc, trace| {
            for e in &trace.events {
                if let Some(r) = &e.resource {
                    *acc.entry((r.clone(), e.activity.clone())).or_insert(0) += 1;
                }
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    if cells.is_empty() {
        return Err(Error::NoResources);
    }
    let resources: Vec<String> = cells.keys().map(|(r, _)| r.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let activities: Vec<String> = log.alphabet().into_iter().collect();
    let counts = resources
        .iter()
        .map(|r| {
            activities
                .iter()
                .map(|a| cells.get(&(r.clone(), a.clone())).copied().unwrap_or(0))
                .collect()
        })
        .collect();
    Ok(ResourceActivityMatrix {
        resources,
        activities,
        counts,
    })
}

/// Moves every nonzero cell by an integer drawn uniformly from
/// `[-noise_bound, noise_bound]`, flooring at 1. Zero cells stay zero.
pub fn perturb_matrix(m: &ResourceActivityMatrix, noise_bound: u64, seed: u64) -> Result<ResourceActivityMatrix> {
    if noise_bound < 1 {
        return Err(Error::ParameterValidation(vec![ParamError::new("noise_bound", "must be at least 1")]));
    }
    let b = noise_bound as i128;
    let counts = m
        .counts
        .par_iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(a, &c)| {
                    if c == 0 {
                        return 0;
                    }
                    let mut rng = stream_for(seed, &["perturb", &m.resources[r], &m.activities[a]]);
                    let u = rng.random_range(-b..=b);
                    (c as i128 + u).max(1) as u64
                })
                .collect()
        })
        .collect();
    Ok(ResourceActivityMatrix {
        resources: m.resources.clone(),
        activities: m.activities.clone(),
        counts,
    })
}

fn jaccard(x: &BTreeSet<usize>, y: &BTreeSet<usize>) -> f64 {
    let union = x.union(y).count();
    if union == 0 {
        return 1.0;
    }
    x.intersection(y).count() as f64 / union as f64
}

/// Complete-linkage agglomerative clustering of resources by Jaccard
/// similarity of their supports. Merging continues while the most similar pair
/// of clusters reaches `threshold`; ties go to the pair whose smallest members
/// come first.
pub fn mine_roles(m: &ResourceActivityMatrix, threshold: f64) -> Result<RoleSet> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::ParameterValidation(vec![ParamError::new("threshold", "must lie in [0, 1]")]));
    }
    let supports: Vec<BTreeSet<usize>> = (0..m.resources.len()).map(|r| m.support(r)).collect();
    // resources are sorted, so index order is lexicographic order
    let mut clusters: Vec<Vec<usize>> = (0..m.resources.len()).map(|r| vec![r]).collect();
    let linkage = |a: &[usize], b: &[usize]| {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| jaccard(&supports[i], &supports[j]))
            .fold(f64::INFINITY, f64::min)
    };
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let s = linkage(&clusters[i], &clusters[j]);
                if best.is_none_or(|(bs, _, _)| s > bs) {
                    best = Some((s, i, j));
                }
            }
        }
        let (s, i, j) = best.expect("at least two clusters");
        if s < threshold {
            break;
        }
        let merged = clusters.remove(j);
        clusters[i].extend(merged);
        clusters[i].sort_unstable();
    }
    let roles = clusters
        .into_iter()
        .enumerate()
        .map(|(n, members)| Role {
            role_id: format!("role-{}", n + 1),
            profile: members
                .iter()
                .flat_map(|&r| supports[r].iter().map(|&a| m.activities[a].clone()))
                .collect(),
            members: members.into_iter().map(|r| m.resources[r].clone()).collect(),
        })
        .collect();
    Ok(RoleSet { roles })
}

/// The perturbed matrix as an abstraction with one row per nonzero cell.
pub fn matrix_abstraction(
    m: &ResourceActivityMatrix,
    origin_log_id: String,
    privacy_metadata: crate::metadata::PrivacyMetadata,
) -> EventLogAbstraction {
    let header = AbstractionHeader {
        abstraction_kind: ABSTRACTION_KIND.to_owned(),
        origin_log_id,
        technique: "role-miner".to_owned(),
        privacy_metadata,
    };
    let columns = vec![
        Column::new("resource", ValueKind::String),
        Column::new("activity", ValueKind::String),
        Column::new("count", ValueKind::Integer),
    ];
    let mut ela = EventLogAbstraction::new(header, columns);
    for (r, row) in m.counts.iter().enumerate() {
        for (a, &c) in row.iter().enumerate() {
            if c > 0 {
                ela.push_row(vec![
                    TypedValue::String(m.resources[r].clone()),
                    TypedValue::String(m.activities[a].clone()),
                    TypedValue::Integer(c as i64),
                ])
                .expect("row matches columns");
            }
        }
    }
    ela
}

/// Builds, perturbs and mines. Returns the roles together with the perturbed
/// matrix as an abstraction.
pub fn privacy_aware_roles(
    log: &EventLog,
    noise_bound: u64,
    threshold: f64,
    seed: u64,
    ctx: &OpContext,
) -> Result<(RoleSet, EventLogAbstraction)> {
    let matrix = build_matrix(log)?;
    let perturbed = perturb_matrix(&matrix, noise_bound, seed)?;
    let roles = mine_roles(&perturbed, threshold)?;
    let mut metadata = log.privacy_metadata.clone();
    metadata.push(RecordFields::new(
        OperationKind::Addition,
        Level::Attribute,
        [RESOURCE_KEY, ACTIVITY_KEY],
        parameter_digest(&[
            ("noise_bound", noise_bound.to_string()),
            ("threshold", threshold.to_string()),
            ("seed", seed.to_string()),
        ]),
        ctx,
    ));
    Ok((roles, matrix_abstraction(&perturbed, log_id(log), metadata)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ela::{parse_ela, write_ela};
    use crate::fixtures::{fix1, hourly_trace};
    use crate::model::parse_timestamp;

    fn ctx() -> OpContext {
        OpContext::at(parse_timestamp("2021-07-01T00:00:00Z").unwrap())
    }

    fn names(roles: &RoleSet) -> Vec<Vec<&str>> {
        roles
            .roles
            .iter()
            .map(|r| r.members.iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn fix1_matrix() {
        let m = build_matrix(&fix1()).unwrap();
        assert_eq!(m.resources, vec!["r1", "r2", "r3"]);
        assert_eq!(m.get("r1", "a"), Some(3));
        assert_eq!(m.get("r2", "b"), Some(2));
        assert_eq!(m.get("r2", "c"), Some(2));
        assert_eq!(m.get("r3", "d"), Some(1));
        assert_eq!(m.counts.iter().flatten().sum::<u64>(), 8);
        assert!(matches!(build_matrix(&EventLog::default()), Err(Error::NoResources)));
    }

    #[test]
    fn single_resource_matrix() {
        let mut t = hourly_trace("x", &["a", "b", "c"]);
        for e in &mut t.events {
            e.resource = Some("solo".into());
        }
        let m = build_matrix(&EventLog::new(vec![t])).unwrap();
        assert_eq!((m.resources.len(), m.activities.len()), (1, 3));
    }

    #[test]
    fn perturbation_respects_bounds_and_support() {
        let m = build_matrix(&fix1()).unwrap();
        for seed in 0..50 {
            let p = perturb_matrix(&m, 1, seed).unwrap();
            for (row, prow) in m.counts.iter().zip(&p.counts) {
                for (&c, &pc) in row.iter().zip(prow) {
                    assert_eq!(c == 0, pc == 0);
                    if c > 0 {
                        assert!(pc >= 1 && pc.abs_diff(c) <= 1);
                    }
                }
            }
        }
        assert!(perturb_matrix(&m, 0, 1).is_err());
    }

    #[test]
    fn perturbation_usually_changes_something() {
        let m = build_matrix(&fix1()).unwrap();
        let changed = (0..100).filter(|&s| perturb_matrix(&m, 1, s).unwrap() != m).count();
        assert!(changed >= 90, "{changed}");
    }

    #[test]
    fn fix1_roles() {
        let m = build_matrix(&fix1()).unwrap();
        let roles = mine_roles(&m, 0.5).unwrap();
        assert_eq!(names(&roles), vec![vec!["r1"], vec!["r2"], vec!["r3"]]);
        let profiles: Vec<Vec<&str>> = roles
            .roles
            .iter()
            .map(|r| r.profile.iter().map(String::as_str).collect())
            .collect();
        assert_eq!(profiles, vec![vec!["a"], vec!["b", "c"], vec!["d"]]);
        assert_eq!(names(&mine_roles(&m, 0.0).unwrap()), vec![vec!["r1", "r2", "r3"]]);
    }

    #[test]
    fn identical_supports_merge_at_one() {
        let m = ResourceActivityMatrix {
            resources: vec!["x".into(), "y".into()],
            activities: vec!["a".into(), "b".into()],
            counts: vec![vec![1, 5], vec![9, 2]],
        };
        assert_eq!(names(&mine_roles(&m, 1.0).unwrap()), vec![vec!["x", "y"]]);
    }

    #[test]
    fn privacy_aware_roles_match_plain_mining() {
        let log = fix1();
        let plain = mine_roles(&build_matrix(&log).unwrap(), 0.5).unwrap();
        for seed in 0..5 {
            let (roles, ela) = privacy_aware_roles(&log, 5, 0.5, seed, &ctx()).unwrap();
            assert_eq!(roles, plain);
            assert_eq!(ela.header.abstraction_kind, ABSTRACTION_KIND);
            assert_eq!(ela.rows.len(), 4);
            assert_eq!(parse_ela(&write_ela(&ela)).unwrap(), ela);
        }
    }
}
