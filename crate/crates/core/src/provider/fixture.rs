use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendReply, CommitBackend};
use crate::model::{Commit, CommitId};

/// One line of a fixture store: a commit and the repository it was pushed to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub repo: String,
    #[serde(flatten)]
    pub commit: Commit,
}

/// Writes a fixture store: one JSON record per line, in the given order.
pub fn write_fixture_store<'a, I>(commits: I, path: &Path) -> io::Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a Commit)>,
{
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    for (repo, commit) in commits {
        let record = FixtureRecord {
            repo: repo.to_string(),
            commit: commit.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Commits served from memory.
///
/// Lookups ignore the repository name: a hosting service answers for any
/// commit in a fork network through any of its repositories, and upstream
/// commits are routinely fetched through the fork.
#[derive(Clone, Debug, Default)]
pub struct FixtureBackend {
    commits: HashMap<CommitId, Commit>,
    name: &'static str,
}

impl FixtureBackend {
    pub fn from_commits<I>(commits: I) -> Self
    where
        I: IntoIterator<Item = Commit>,
    {
        Self {
            commits: commits.into_iter().map(|c| (c.hash, c)).collect(),
            name: "fixture",
        }
    }

    /// The same store, reported under the `simulator` backend name.
    pub fn simulator<I>(commits: I) -> Self
    where
        I: IntoIterator<Item = Commit>,
    {
        Self {
            name: "simulator",
            ..Self::from_commits(commits)
        }
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut commits = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), n + 1),
                )
            })?;
            commits.push(record.commit);
        }
        Ok(Self::from_commits(commits))
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }
}

impl CommitBackend for FixtureBackend {
    fn name(&self) -> &'static str {
        self.name
    }

    fn fetch(&self, _repo: &str, id: &CommitId) -> BackendReply {
        match self.commits.get(id) {
            Some(c) => BackendReply::Found(c.clone()),
            None => BackendReply::NotFound,
        }
    }
}
