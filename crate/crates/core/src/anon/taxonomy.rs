use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use crate::error::{Error, Result};

/// A rooted tree over attribute values, stored as child to parent edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    parents: BTreeMap<String, String>,
    root: String,
}

impl Taxonomy {
    pub fn new<I, C, P>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C, P)>,
        C: Into<String>,
        P: Into<String>,
    {
        let mut parents = BTreeMap::new();
        for (child, parent) in edges {
            let (child, parent) = (child.into(), parent.into());
            if child == parent {
                return Err(Error::InvalidTaxonomy(format!("`{child}` is its own parent")));
            }
            if let Some(existing) = parents.insert(child.clone(), parent.clone()) {
                if existing != parent {
                    return Err(Error::InvalidTaxonomy(format!(
                        "`{child}` has two parents: `{existing}` and `{parent}`"
                    )));
                }
            }
        }
        let roots: BTreeSet<&String> = parents
            .values()
            .filter(|p| !parents.contains_key(*p))
            .collect();
        let root = match roots.len() {
            1 => (*roots.iter().next().expect("one root")).clone(),
            0 if parents.is_empty() => return Err(Error::InvalidTaxonomy("no edges".into())),
            0 => return Err(Error::InvalidTaxonomy("cycle: no root".into())),
            _ => {
                return Err(Error::InvalidTaxonomy(format!(
                    "multiple roots: {}",
                    roots.into_iter().cloned().collect::<Vec<_>>().join(", ")
                )))
            }
        };
        // with a unique root and one parent per node, every walk upwards must
        // reach the root within |nodes| steps unless it cycles
        for start in parents.keys() {
            let mut node = start;
            for _ in 0..=parents.len() {
                match parents.get(node) {
                    Some(p) => node = p,
                    None => break,
                }
            }
            if *node != root {
                return Err(Error::InvalidTaxonomy(format!("`{start}` lies on a cycle")));
            }
        }
        Ok(Taxonomy { parents, root })
    }

    /// Reads a two-column `child,parent` edge list. A `child,parent` header row is skipped.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut edges = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidTaxonomy(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::InvalidTaxonomy(format!(
                    "line {}: expected child,parent",
                    i + 1
                )));
            }
            if i == 0 && &record[0] == "child" && &record[1] == "parent" {
                continue;
            }
            edges.push((record[0].to_owned(), record[1].to_owned()));
        }
        Taxonomy::new(edges)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn parent(&self, value: &str) -> Option<&str> {
        self.parents.get(value).map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parents.iter().map(|(c, p)| (c.as_str(), p.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_lookup() {
        let t = Taxonomy::new([("b", "clinical"), ("c", "clinical"), ("clinical", "any")]).unwrap();
        assert_eq!(t.root(), "any");
        assert_eq!(t.parent("b"), Some("clinical"));
        assert_eq!(t.parent("any"), None);
    }

    #[test]
    fn rejects_bad_trees() {
        assert!(Taxonomy::new([("a", "b"), ("b", "a")]).is_err());
        assert!(Taxonomy::new([("a", "x"), ("b", "y")]).is_err());
        assert!(Taxonomy::new([("a", "x"), ("a", "y")]).is_err());
        assert!(Taxonomy::new(Vec::<(String, String)>::new()).is_err());
        // a cycle hanging off an otherwise valid tree
        assert!(Taxonomy::new([("a", "root"), ("b", "c"), ("c", "b")]).is_err());
    }

    #[test]
    fn reads_edge_list() {
        let csv = "child,parent\nb, clinical\nc,clinical\n";
        let t = Taxonomy::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.root(), "clinical");
        assert_eq!(t.parent("b"), Some("clinical"));
        assert!(Taxonomy::from_csv("a,b,c\n".as_bytes()).is_err());
    }
}
