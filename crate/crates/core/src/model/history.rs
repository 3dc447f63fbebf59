use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Commit, CommitId, Identity, ModelError, TagRecord, Timestamp};

/// Commit history of one repository.
///
/// The commit set is append-only and kept in insertion order, which is always
/// a topological order (parents are inserted before children). Commits that a
/// rebase replaced stay in the set; they are told apart from live commits only
/// by reachability from `heads`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepoHistory {
    repo_name: String,
    commits: IndexMap<CommitId, Commit>,
    heads: BTreeSet<CommitId>,
    tags: Vec<TagRecord>,
}

/// Result of [`RepoHistory::rebase`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RebaseOutcome {
    /// `(old, new)` pairs in suffix order, oldest first.
    pub mapping: Vec<(CommitId, CommitId)>,
    /// Replaced commits, now unreachable from every head.
    pub dangling: BTreeSet<CommitId>,
    /// Head after the rebase.
    pub head: CommitId,
}

impl RepoHistory {
    pub fn new(repo_name: impl Into<String>) -> Self {
        Self {
            repo_name: repo_name.into(),
            commits: IndexMap::new(),
            heads: BTreeSet::new(),
            tags: Vec::new(),
        }
    }

    pub fn repo_name(&self) -> &str {
        &self.repo_name
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }

    pub fn get(&self, id: &CommitId) -> Option<&Commit> {
        self.commits.get(id)
    }

    pub fn contains(&self, id: &CommitId) -> bool {
        self.commits.contains_key(id)
    }

    /// All commits in insertion (topological) order, dangling ones included.
    pub fn commits(&self) -> impl Iterator<Item = &Commit> {
        self.commits.values()
    }

    pub fn heads(&self) -> &BTreeSet<CommitId> {
        &self.heads
    }

    /// The head when there is exactly one.
    pub fn head(&self) -> Option<CommitId> {
        if self.heads.len() == 1 {
            self.heads.iter().next().copied()
        } else {
            None
        }
    }

    pub fn tags(&self) -> &[TagRecord] {
        &self.tags
    }

    /// Appends a batch pushed by `pusher`.
    ///
    /// The batch must be a chain: every commit is authored and committed by
    /// the pusher at a single instant, each commit after the first has its
    /// predecessor as first parent, and committer timestamps strictly
    /// increase. Nothing is modified when validation fails.
    pub fn push(&mut self, batch: Vec<Commit>, pusher: &Identity) -> Result<(), ModelError> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut batch_ids = HashSet::with_capacity(batch.len());
        for (i, commit) in batch.iter().enumerate() {
            if commit.author != *pusher || commit.committer != *pusher {
                return Err(violation(format!(
                    "batch commit {i}: author and committer must both be the pusher `{pusher}`"
                )));
            }
            if commit.author_ts != commit.committer_ts {
                return Err(violation(format!(
                    "batch commit {i}: author_ts must equal committer_ts"
                )));
            }
            commit.verify()?;
            if self.commits.contains_key(&commit.hash) || !batch_ids.insert(commit.hash) {
                return Err(violation(format!(
                    "batch commit {i}: {} is already present",
                    commit.hash
                )));
            }
            if i > 0 {
                let prev = &batch[i - 1];
                if commit.first_parent() != Some(&prev.hash) {
                    return Err(violation(format!(
                        "batch commit {i}: first parent must be the previous batch commit"
                    )));
                }
                if commit.committer_ts <= prev.committer_ts {
                    return Err(violation(format!(
                        "batch commit {i}: committer timestamps must strictly increase"
                    )));
                }
            }
            let skip = usize::from(i > 0);
            for parent in commit.parents.iter().skip(skip) {
                if !self.commits.contains_key(parent) && !batch_ids.contains(parent) {
                    return Err(ModelError::UnknownParent(*parent));
                }
            }
        }

        let last = batch[batch.len() - 1].hash;
        for commit in batch {
            for parent in &commit.parents {
                self.heads.remove(parent);
            }
            self.commits.insert(commit.hash, commit);
        }
        self.heads.insert(last);
        Ok(())
    }

    /// A new repository holding exactly the ancestry closure of `base`.
    pub fn fork(&self, base: &CommitId, new_name: impl Into<String>) -> Result<Self, ModelError> {
        if !self.contains(base) {
            return Err(ModelError::UnknownCommit(*base));
        }
        let keep = self.ancestry(base);
        let commits = self
            .commits
            .iter()
            .filter(|(id, _)| keep.contains(*id))
            .map(|(id, c)| (*id, c.clone()))
            .collect();
        let tags = self
            .tags
            .iter()
            .filter(|t| keep.contains(&t.target))
            .cloned()
            .collect();
        Ok(Self {
            repo_name: new_name.into(),
            commits,
            heads: BTreeSet::from([*base]),
            tags,
        })
    }

    /// Re-applies the divergent suffix of this fork on top of `new_base`.
    ///
    /// The suffix is the first-parent chain from the single head back to the
    /// first commit that `upstream` also holds. Each replacement keeps its
    /// payload digest, author and author timestamp, gets `now` as committer
    /// timestamp and a freshly computed id. The ancestry of `new_base` is
    /// imported from `upstream`; the replaced commits remain in the set.
    pub fn rebase(
        &mut self,
        upstream: &RepoHistory,
        new_base: &CommitId,
        now: Timestamp,
    ) -> Result<RebaseOutcome, ModelError> {
        if !upstream.contains(new_base) {
            return Err(ModelError::UnknownCommit(*new_base));
        }
        let head = match self.heads.len() {
            1 => *self.heads.iter().next().unwrap(),
            n => {
                return Err(ModelError::AmbiguousBase(format!(
                    "fork must have exactly one head, found {n}"
                )))
            }
        };

        let mut suffix = Vec::new();
        let mut cursor = head;
        while !upstream.contains(&cursor) {
            let commit = &self.commits[&cursor];
            match commit.parents.as_slice() {
                [parent] => {
                    suffix.push(commit);
                    cursor = *parent;
                }
                [] => {
                    return Err(ModelError::AmbiguousBase(
                        "fork shares no history with upstream".to_string(),
                    ))
                }
                _ => {
                    return Err(ModelError::AmbiguousBase(format!(
                        "merge commit {} in the divergent suffix",
                        commit.hash
                    )))
                }
            }
        }
        suffix.reverse();

        if let Some(c) = suffix.iter().find(|c| c.author_ts > now) {
            return Err(violation(format!(
                "rebase time {now} precedes author_ts of {}",
                c.hash
            )));
        }

        let mut replacements = Vec::with_capacity(suffix.len());
        let mut parent = *new_base;
        for old in &suffix {
            let new = Commit::new(
                vec![parent],
                old.author.clone(),
                old.committer.clone(),
                old.author_ts,
                now,
                old.payload_digest,
            )?;
            if self.commits.contains_key(&new.hash) || upstream.contains(&new.hash) {
                return Err(violation(format!(
                    "rebase of {} reproduces existing id {}",
                    old.hash, new.hash
                )));
            }
            parent = new.hash;
            replacements.push(new);
        }
        let mapping: Vec<_> = suffix
            .iter()
            .zip(&replacements)
            .map(|(old, new)| (old.hash, new.hash))
            .collect();

        let imported = self.missing_ancestry_from(upstream, new_base);
        for commit in imported {
            self.commits.insert(commit.hash, commit);
        }
        for commit in replacements {
            self.commits.insert(commit.hash, commit);
        }
        let new_head = parent;
        self.heads.clear();
        self.heads.insert(new_head);

        Ok(RebaseOutcome {
            dangling: mapping.iter().map(|(old, _)| *old).collect(),
            mapping,
            head: new_head,
        })
    }

    /// Appends a tag. Dangling targets are accepted.
    pub fn tag(
        &mut self,
        label: impl Into<String>,
        target: &CommitId,
        at: Timestamp,
    ) -> Result<(), ModelError> {
        let record = TagRecord::new(label, at, *target)?;
        if !self.contains(target) {
            return Err(ModelError::UnknownCommit(*target));
        }
        if self.tags.iter().any(|t| t.label == record.label) {
            return Err(ModelError::DuplicateLabel(record.label));
        }
        self.tags.push(record);
        Ok(())
    }

    /// `start` together with every commit reachable through parent links.
    pub fn ancestry(&self, start: &CommitId) -> HashSet<CommitId> {
        let mut seen = HashSet::new();
        let mut stack = vec![*start];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(c) = self.commits.get(&id) {
                stack.extend(c.parents.iter().copied());
            }
        }
        seen
    }

    /// Commits reachable from any head.
    pub fn live(&self) -> HashSet<CommitId> {
        let mut live = HashSet::new();
        for head in &self.heads {
            if live.contains(head) {
                continue;
            }
            live.extend(self.ancestry(head));
        }
        live
    }

    /// Commits present in the set but unreachable from every head.
    pub fn dangling(&self) -> BTreeSet<CommitId> {
        let live = self.live();
        self.commits
            .keys()
            .filter(|id| !live.contains(*id))
            .copied()
            .collect()
    }

    /// Kahn's algorithm over the parent relation; fails on a cycle.
    pub fn topo_order(&self) -> Result<Vec<CommitId>, ModelError> {
        let mut pending: HashMap<CommitId, usize> = HashMap::with_capacity(self.commits.len());
        let mut children: HashMap<CommitId, Vec<CommitId>> = HashMap::new();
        for (id, c) in &self.commits {
            let known: Vec<_> = c
                .parents
                .iter()
                .filter(|p| self.commits.contains_key(*p))
                .collect();
            pending.insert(*id, known.len());
            for p in known {
                children.entry(*p).or_default().push(*id);
            }
        }
        let mut ready: Vec<CommitId> = self
            .commits
            .keys()
            .filter(|id| pending[*id] == 0)
            .copied()
            .collect();
        let mut order = Vec::with_capacity(self.commits.len());
        while let Some(id) = ready.pop() {
            order.push(id);
            for child in children.get(&id).into_iter().flatten() {
                let n = pending.get_mut(child).unwrap();
                *n -= 1;
                if *n == 0 {
                    ready.push(*child);
                }
            }
        }
        if order.len() != self.commits.len() {
            let stuck = self
                .commits
                .keys()
                .find(|id| pending[*id] > 0)
                .copied()
                .unwrap();
            return Err(ModelError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Checks closure under ancestry, acyclicity and that heads and tags resolve.
    pub fn validate(&self) -> Result<(), ModelError> {
        for c in self.commits.values() {
            for p in &c.parents {
                if !self.commits.contains_key(p) {
                    return Err(ModelError::UnknownParent(*p));
                }
            }
        }
        for id in self.heads.iter().chain(self.tags.iter().map(|t| &t.target)) {
            if !self.contains(id) {
                return Err(ModelError::UnknownCommit(*id));
            }
        }
        self.topo_order().map(|_| ())
    }

    /// Ancestors of `base` in `upstream` that this history lacks, in upstream order.
    fn missing_ancestry_from(&self, upstream: &RepoHistory, base: &CommitId) -> Vec<Commit> {
        let mut found = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![*base];
        while let Some(id) = stack.pop() {
            if self.commits.contains_key(&id) || !seen.insert(id) {
                continue;
            }
            if let Some((idx, _, c)) = upstream.commits.get_full(&id) {
                found.push(idx);
                stack.extend(c.parents.iter().copied());
            }
        }
        found.sort_unstable();
        found
            .into_iter()
            .map(|idx| upstream.commits[idx].clone())
            .collect()
    }
}

fn violation(msg: String) -> ModelError {
    ModelError::PreconditionViolation(msg)
}
