//! File-backed, content-addressed repository of logs and abstractions, with
//! lineage and a job runner.
//!
//! Layout under the root directory:
//!
//! ```text
//! objects/<entry_id>        canonical bytes, never rewritten
//! entries/<entry_id>.json   RepoEntry
//! ```

mod config;
mod jobs;
mod keys;

pub use config::{selector_from_json, typed_from_json, OpConfig};
pub use jobs::{JobRunner, JobSpec, JobState, JobStatus};
pub use keys::{EnvKeyStore, KeyStore, MemoryKeyStore};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::ela::{parse_ela, write_ela, EventLogAbstraction};
use crate::error::{Error, Result};
use crate::metadata::content_id;
use crate::model::{EventLog, Timestamp};
use crate::xes::{parse_xes, write_xes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Xes,
    Ela,
}

impl EntryKind {
    pub fn parse(raw: &str) -> Option<EntryKind> {
        match raw {
            "xes" => Some(EntryKind::Xes),
            "ela" => Some(EntryKind::Ela),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Xes => "xes",
            EntryKind::Ela => "ela",
        }
    }

    /// Kind implied by a file name, falling back to sniffing the content.
    pub fn guess(file_name: Option<&str>, content: &[u8]) -> EntryKind {
        match file_name.and_then(|n| Path::new(n).extension()).and_then(|e| e.to_str()) {
            Some("xes") | Some("xml") => EntryKind::Xes,
            Some("ela") | Some("json") => EntryKind::Ela,
            _ => match content.iter().find(|b| !b.is_ascii_whitespace()) {
                Some(b'{') => EntryKind::Ela,
                _ => EntryKind::Xes,
            },
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            EntryKind::Xes => "application/xml",
            EntryKind::Ela => "application/json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoEntry {
    pub entry_id: String,
    pub kind: EntryKind,
    pub name: String,
    pub created_at: Timestamp,
    pub parent_ids: Vec<String>,
    pub technique: Option<String>,
    /// Tombstone: hidden from listings, still readable and still a valid parent.
    #[serde(default)]
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEdge {
    pub parent: String,
    pub child: String,
    pub technique: Option<String>,
}

/// An entry and all of its ancestors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub root: String,
    pub nodes: Vec<RepoEntry>,
    pub edges: Vec<LineageEdge>,
}

impl Lineage {
    /// Number of nodes on the longest ancestry path ending at the root.
    pub fn depth(&self) -> usize {
        fn walk(id: &str, parents: &BTreeMap<&str, Vec<&str>>, memo: &mut BTreeMap<String, usize>) -> usize {
            if let Some(d) = memo.get(id) {
                return *d;
            }
            let d = 1 + parents
                .get(id)
                .map(|ps| ps.iter().map(|p| walk(p, parents, memo)).max().unwrap_or(0))
                .unwrap_or(0);
            memo.insert(id.to_owned(), d);
            d
        }
        let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            parents.entry(e.child.as_str()).or_default().push(e.parent.as_str());
        }
        walk(&self.root, &parents, &mut BTreeMap::new())
    }
}

/// Parsed repository content.
#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Log(EventLog),
    Abstraction(EventLogAbstraction),
}

pub struct Repository {
    root: PathBuf,
    committer: Mutex<()>,
}

fn parse_failure(kind: EntryKind, err: Error) -> Error {
    Error::ParseFailure {
        kind: kind.as_str().to_owned(),
        message: err.to_string(),
    }
}

impl Repository {
    pub fn open(root: impl Into<PathBuf>) -> Result<Repository> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        fs::create_dir_all(root.join("entries"))?;
        Ok(Repository {
            root,
            committer: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, id: &str) -> PathBuf {
        self.root.join("objects").join(id)
    }

    fn entry_path(&self, id: &str) -> PathBuf {
        self.root.join("entries").join(format!("{id}.json"))
    }

    fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    fn valid_id(id: &str) -> bool {
        !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_hexdigit())
    }

    /// Parses `content` as `kind`, stores its canonical form and records the
    /// entry. Storing equal content again returns the existing entry.
    pub fn store(
        &self,
        content: &[u8],
        kind: EntryKind,
        name: &str,
        parents: &[String],
        technique: Option<&str>,
    ) -> Result<RepoEntry> {
        let canonical = match kind {
            EntryKind::Xes => write_xes(&parse_xes(content).map_err(|e| parse_failure(kind, e))?),
            EntryKind::Ela => write_ela(&parse_ela(content).map_err(|e| parse_failure(kind, e))?),
        };
        self.store_canonical(canonical, kind, name, parents, technique)
    }

    pub(crate) fn store_canonical(
        &self,
        canonical: Vec<u8>,
        kind: EntryKind,
        name: &str,
        parents: &[String],
        technique: Option<&str>,
    ) -> Result<RepoEntry> {
        let id = content_id(&canonical);
        let _guard = self.committer.lock().unwrap_or_else(|p| p.into_inner());
        for parent in parents {
            if !self.entry_path(parent).exists() || !Repository::valid_id(parent) {
                return Err(Error::UnknownEntry(parent.clone()));
            }
        }
        if let Ok(mut existing) = self.read_entry(&id) {
            if existing.deleted {
                existing.deleted = false;
                Repository::write_atomically(&self.entry_path(&id), &serde_json::to_vec_pretty(&existing).expect("entry serializes"))?;
            }
            return Ok(existing);
        }
        let mut parent_ids: Vec<String> = Vec::new();
        for p in parents {
            if *p != id && !parent_ids.contains(p) {
                parent_ids.push(p.clone());
            }
        }
        let entry = RepoEntry {
            entry_id: id.clone(),
            kind,
            name: name.to_owned(),
            created_at: crate::model::to_millis(Utc::now()),
            parent_ids,
            technique: technique.map(str::to_owned),
            deleted: false,
        };
        Repository::write_atomically(&self.object_path(&id), &canonical)?;
        Repository::write_atomically(&self.entry_path(&id), &serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
        log::info!("stored {} entry {id} ({name})", kind.as_str());
        Ok(entry)
    }

    fn read_entry(&self, id: &str) -> Result<RepoEntry> {
        if !Repository::valid_id(id) {
            return Err(Error::UnknownEntry(id.to_owned()));
        }
        let raw = fs::read(self.entry_path(id)).map_err(|_| Error::UnknownEntry(id.to_owned()))?;
        serde_json::from_slice(&raw).map_err(|e| Error::InvalidOperation(format!("corrupt entry {id}: {e}")))
    }

    /// Entry metadata, including tombstoned entries.
    pub fn entry(&self, id: &str) -> Result<RepoEntry> {
        self.read_entry(id)
    }

    /// Live entries, oldest first.
    pub fn list(&self) -> Result<Vec<RepoEntry>> {
        let mut out = Vec::new();
        for item in fs::read_dir(self.root.join("entries"))? {
            let path = item?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let entry = self.read_entry(id)?;
            if !entry.deleted {
                out.push(entry);
            }
        }
        out.sort_by(|a, b| (a.created_at, &a.entry_id).cmp(&(b.created_at, &b.entry_id)));
        Ok(out)
    }

    pub fn content(&self, id: &str) -> Result<Vec<u8>> {
        self.read_entry(id)?;
        Ok(fs::read(self.object_path(id))?)
    }

    pub fn load(&self, id: &str) -> Result<Content> {
        let entry = self.read_entry(id)?;
        let bytes = fs::read(self.object_path(id))?;
        Ok(match entry.kind {
            EntryKind::Xes => Content::Log(parse_xes(&bytes)?),
            EntryKind::Ela => Content::Abstraction(parse_ela(&bytes)?),
        })
    }

    pub fn load_log(&self, id: &str) -> Result<EventLog> {
        match self.load(id)? {
            Content::Log(log) => Ok(log),
            Content::Abstraction(_) => Err(Error::InvalidOperation(format!("entry {id} is an abstraction, not a log"))),
        }
    }

    /// Hides the entry from listings. Its bytes and lineage stay intact.
    pub fn delete(&self, id: &str) -> Result<RepoEntry> {
        let _guard = self.committer.lock().unwrap_or_else(|p| p.into_inner());
        let mut entry = self.read_entry(id)?;
        entry.deleted = true;
        Repository::write_atomically(&self.entry_path(id), &serde_json::to_vec_pretty(&entry).expect("entry serializes"))?;
        Ok(entry)
    }

    pub fn lineage(&self, id: &str) -> Result<Lineage> {
        let root = self.read_entry(id)?;
        let mut nodes = vec![root.clone()];
        let mut edges = Vec::new();
        let mut seen = BTreeSet::from([root.entry_id.clone()]);
        let mut queue = VecDeque::from([root]);
        while let Some(entry) = queue.pop_front() {
            for parent in &entry.parent_ids {
                edges.push(LineageEdge {
                    parent: parent.clone(),
                    child: entry.entry_id.clone(),
                    technique: entry.technique.clone(),
                });
                if seen.insert(parent.clone()) {
                    let p = self.read_entry(parent)?;
                    nodes.push(p.clone());
                    queue.push_back(p);
                }
            }
        }
        Ok(Lineage {
            root: id.to_owned(),
            nodes,
            edges,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fix1;

    fn repo() -> (tempfile::TempDir, Repository) {
        let dir = tempfile::tempdir().unwrap();
        let repo = Repository::open(dir.path()).unwrap();
        (dir, repo)
    }

    #[test]
    fn content_addressing() {
        let (_d, repo) = repo();
        let bytes = write_xes(&fix1());
        let a = repo.store(&bytes, EntryKind::Xes, "fix1.xes", &[], None).unwrap();
        let b = repo.store(&bytes, EntryKind::Xes, "again.xes", &[], None).unwrap();
        assert_eq!(a.entry_id, b.entry_id);
        assert_eq!(repo.list().unwrap().len(), 1);
        assert_eq!(repo.load_log(&a.entry_id).unwrap(), fix1());
        assert!(matches!(
            repo.store(b"<log><oops", EntryKind::Xes, "bad", &[], None),
            Err(Error::ParseFailure { .. })
        ));
    }

    #[test]
    fn lineage_and_tombstones() {
        let (_d, repo) = repo();
        let root = repo.store(&write_xes(&fix1()), EntryKind::Xes, "fix1", &[], None).unwrap();
        assert_eq!(repo.lineage(&root.entry_id).unwrap().nodes.len(), 1);

        let mut left = fix1();
        left.traces.pop();
        let mut right = fix1();
        right.traces.remove(0);
        let l = repo.store(&write_xes(&left), EntryKind::Xes, "l", std::slice::from_ref(&root.entry_id), Some("suppress")).unwrap();
        let r = repo.store(&write_xes(&right), EntryKind::Xes, "r", std::slice::from_ref(&root.entry_id), Some("swap")).unwrap();
        let mut merged = fix1();
        merged.traces.truncate(1);
        let m = repo
            .store(&write_xes(&merged), EntryKind::Xes, "m", &[l.entry_id.clone(), r.entry_id.clone()], Some("privacy-analysis"))
            .unwrap();
        let lin = repo.lineage(&m.entry_id).unwrap();
        assert_eq!(lin.nodes.len(), 4);
        assert_eq!(lin.edges.len(), 4);
        assert_eq!(lin.depth(), 3);

        repo.delete(&l.entry_id).unwrap();
        assert_eq!(repo.list().unwrap().len(), 3);
        assert_eq!(repo.lineage(&m.entry_id).unwrap().nodes.len(), 4);
        assert!(repo.entry(&l.entry_id).unwrap().deleted);
        assert!(matches!(repo.lineage("deadbeef"), Err(Error::UnknownEntry(_))));
        assert!(matches!(
            repo.store(&write_xes(&fix1()), EntryKind::Xes, "x", &["../etc".into()], None),
            Err(Error::UnknownEntry(_))
        ));
    }
}
