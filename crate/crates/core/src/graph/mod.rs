//! The per-fork commit graph: every commit the archive mentions for the
//! upstream or the fork, dangling ones included, closed under ancestry as far
//! as metadata resolves.

mod build;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::model::{Commit, CommitId};

pub use build::{build_graph, CompletionReport};
pub use snapshot::{GraphSnapshot, GRAPH_SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("unknown commit {0}")]
    UnknownCommit(CommitId),
    #[error("commit graph contains a cycle through {0}")]
    Cycle(CommitId),
    #[error("no commit could be resolved ({0})")]
    NothingResolved(String),
    #[error("bad graph snapshot: {0}")]
    BadSnapshot(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Immutable commit DAG with upstream and fork membership.
///
/// Vertices are numbered in ascending id order. `parents` and `children`
/// hold only resolved vertices; parent ids that never resolved are counted in
/// the frontier instead.
#[derive(Clone, Debug)]
pub struct CommitGraph {
    upstream_repo: String,
    fork_repo: String,
    commits: Vec<Commit>,
    index: HashMap<CommitId, u32>,
    parents: Vec<Vec<u32>>,
    children: Vec<Vec<u32>>,
    upstream: Vec<bool>,
    fork: Vec<bool>,
    /// Has a parent outside the graph.
    truncated: Vec<bool>,
    frontier: BTreeMap<CommitId, usize>,
    fork_seed_missing: bool,
}

impl CommitGraph {
    /// Assembles a graph from resolved commits and the ids each repository's
    /// events referenced. Seeds and parents that are not among `commits` end
    /// up in the frontier, counted once per reference.
    pub fn from_parts<I>(
        upstream_repo: impl Into<String>,
        fork_repo: impl Into<String>,
        commits: I,
        upstream_seeds: &[CommitId],
        fork_seeds: &[CommitId],
    ) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = Commit>,
    {
        let mut commits: Vec<Commit> = commits.into_iter().collect();
        commits.sort_by_key(|c| c.hash);
        commits.dedup_by(|a, b| a.hash == b.hash);
        let index: HashMap<CommitId, u32> = commits
            .iter()
            .enumerate()
            .map(|(i, c)| (c.hash, i as u32))
            .collect();

        let n = commits.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut truncated = vec![false; n];
        let mut frontier: BTreeMap<CommitId, usize> = BTreeMap::new();
        for (i, c) in commits.iter().enumerate() {
            for p in &c.parents {
                match index.get(p) {
                    Some(&pi) => {
                        parents[i].push(pi);
                        children[pi as usize].push(i as u32);
                    }
                    None => {
                        truncated[i] = true;
                        *frontier.entry(*p).or_default() += 1;
                    }
                }
            }
        }

        let mut closure = |seeds: &[CommitId]| {
            let mut member = vec![false; n];
            let mut missing = false;
            let mut stack = Vec::new();
            for s in seeds {
                match index.get(s) {
                    Some(&i) => stack.push(i),
                    None => {
                        missing = true;
                        *frontier.entry(*s).or_default() += 1;
                    }
                }
            }
            while let Some(i) = stack.pop() {
                if std::mem::replace(&mut member[i as usize], true) {
                    continue;
                }
                stack.extend(parents[i as usize].iter().copied());
            }
            (member, missing)
        };
        let (upstream, _) = closure(upstream_seeds);
        let (fork, fork_seed_missing) = closure(fork_seeds);

        let graph = Self {
            upstream_repo: upstream_repo.into(),
            fork_repo: fork_repo.into(),
            commits,
            index,
            parents,
            children,
            upstream,
            fork,
            truncated,
            frontier,
            fork_seed_missing,
        };
        graph.check_acyclic()?;
        Ok(graph)
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        let n = self.commits.len();
        let mut pending: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop_front() {
            seen += 1;
            for &c in &self.children[i] {
                pending[c as usize] -= 1;
                if pending[c as usize] == 0 {
                    queue.push_back(c as usize);
                }
            }
        }
        if seen == n {
            Ok(())
        } else {
            let stuck = (0..n).find(|&i| pending[i] > 0).expect("a vertex is stuck");
            Err(GraphError::Cycle(self.commits[stuck].hash))
        }
    }

    pub fn upstream_repo(&self) -> &str {
        &self.upstream_repo
    }

    pub fn fork_repo(&self) -> &str {
        &self.fork_repo
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }

    pub fn contains(&self, id: &CommitId) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &CommitId) -> Option<&Commit> {
        self.index.get(id).map(|&i| &self.commits[i as usize])
    }

    /// Vertices in ascending id order.
    pub fn commits(&self) -> &[Commit] {
        &self.commits
    }

    pub fn vertex_of(&self, id: &CommitId) -> Option<usize> {
        self.index.get(id).map(|&i| i as usize)
    }

    pub fn commit_at(&self, vertex: usize) -> &Commit {
        &self.commits[vertex]
    }

    pub fn parents_of(&self, vertex: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[vertex].iter().map(|&p| p as usize)
    }

    pub fn children_of(&self, vertex: usize) -> impl Iterator<Item = usize> + '_ {
        self.children[vertex].iter().map(|&c| c as usize)
    }

    /// `(parent, child)` pairs, ordered by child then parent position.
    pub fn edges(&self) -> impl Iterator<Item = (CommitId, CommitId)> + '_ {
        self.parents.iter().enumerate().flat_map(move |(c, ps)| {
            ps.iter()
                .map(move |&p| (self.commits[p as usize].hash, self.commits[c].hash))
        })
    }

    pub fn in_upstream(&self, id: &CommitId) -> bool {
        self.vertex_of(id).is_some_and(|v| self.upstream[v])
    }

    pub fn in_fork(&self, id: &CommitId) -> bool {
        self.vertex_of(id).is_some_and(|v| self.fork[v])
    }

    pub fn upstream_set(&self) -> BTreeSet<CommitId> {
        self.members(&self.upstream)
    }

    pub fn fork_set(&self) -> BTreeSet<CommitId> {
        self.members(&self.fork)
    }

    fn members(&self, flags: &[bool]) -> BTreeSet<CommitId> {
        flags
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.commits[i].hash)
            .collect()
    }

    /// Ids referenced but never resolved, with the number of references.
    pub fn frontier(&self) -> &BTreeMap<CommitId, usize> {
        &self.frontier
    }

    /// Some fork commit, or an id a fork event listed, has unresolved
    /// ancestry.
    pub fn fork_incomplete(&self) -> bool {
        self.fork_seed_missing || (0..self.len()).any(|v| self.fork[v] && self.truncated[v])
    }

    /// Fork-only commits reachable from `patch` along parent→child edges,
    /// excluding `patch` itself, as vertex numbers in ascending order.
    pub fn nbcc_vertices(&self, patch: &CommitId) -> Result<Vec<usize>, GraphError> {
        let start = self
            .vertex_of(patch)
            .ok_or(GraphError::UnknownCommit(*patch))?;
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut stack = vec![start];
        let mut out = Vec::new();
        while let Some(v) = stack.pop() {
            for c in self.children_of(v) {
                if !std::mem::replace(&mut seen[c], true) {
                    if self.fork[c] && !self.upstream[c] {
                        out.push(c);
                    }
                    stack.push(c);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Non-upstream child commits of `patch` observed in the fork.
    pub fn nbcc(&self, patch: &CommitId) -> Result<BTreeSet<CommitId>, GraphError> {
        Ok(self
            .nbcc_vertices(patch)?
            .into_iter()
            .map(|v| self.commits[v].hash)
            .collect())
    }

    /// `ancestor` equals `descendant` or lies in its resolved ancestry.
    pub fn is_ancestor_or_equal(&self, ancestor: &CommitId, descendant: &CommitId) -> bool {
        let (Some(a), Some(d)) = (self.vertex_of(ancestor), self.vertex_of(descendant)) else {
            return false;
        };
        let mut seen = vec![false; self.len()];
        let mut stack = vec![d];
        while let Some(v) = stack.pop() {
            if v == a {
                return true;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(self.parents_of(v));
            }
        }
        false
    }

    /// The upstream commit the fork started from: the upstream parent of the
    /// earliest-committed fork-only commit that has one. Ties go to the
    /// smaller id.
    pub fn fork_origin(&self) -> Option<CommitId> {
        (0..self.len())
            .filter(|&v| self.fork[v] && !self.upstream[v])
            .filter_map(|v| {
                let base = self.parents_of(v).find(|&p| self.upstream[p])?;
                let c = &self.commits[v];
                Some(((c.committer_ts, c.hash), self.commits[base].hash))
            })
            .min()
            .map(|(_, base)| base)
    }
}
