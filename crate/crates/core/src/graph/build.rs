use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{CommitGraph, GraphError};
use crate::archive::EventIndex;
use crate::model::{Commit, CommitId};
use crate::provider::{FetchSource, FetchStatus, Provider};

/// What graph construction could and could not resolve.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub requested: usize,
    pub resolved: usize,
    pub from_cache: usize,
    pub from_backend: usize,
    pub not_found: Vec<CommitId>,
    pub transient: Vec<CommitId>,
    /// Provider errors (budget, credentials, cache), one per affected id.
    pub errors: BTreeMap<CommitId, String>,
    pub frontier: usize,
}

impl CompletionReport {
    pub fn is_complete(&self) -> bool {
        self.frontier == 0
    }

    pub fn summary(&self) -> String {
        format!(
            "requested={} resolved={} cached={} fetched={} not_found={} transient={} errors={} frontier={}",
            self.requested,
            self.resolved,
            self.from_cache,
            self.from_backend,
            self.not_found.len(),
            self.transient.len(),
            self.errors.len(),
            self.frontier
        )
    }
}

/// Resolves every commit listed by either repository's events, then their
/// parents, wave by wave, until nothing new turns up.
///
/// Ids are fetched through the repository whose event referenced them, and
/// parents through the same repository as their child. Unresolvable ids go
/// to the frontier; the build fails only when nothing resolves at all.
pub fn build_graph(
    index: &EventIndex,
    upstream_repo: &str,
    fork_repo: &str,
    provider: &Provider,
) -> Result<(CommitGraph, CompletionReport), GraphError> {
    let upstream_seeds = index.commit_ids_for_repo(upstream_repo);
    let fork_seeds = index.commit_ids_for_repo(fork_repo);

    let mut report = CompletionReport::default();
    let mut resolved: HashMap<CommitId, Commit> = HashMap::new();
    let mut queued: HashSet<CommitId> = HashSet::new();
    let mut wave: Vec<(CommitId, &str)> = Vec::new();
    for (seeds, repo) in [(&upstream_seeds, upstream_repo), (&fork_seeds, fork_repo)] {
        for id in seeds {
            if queued.insert(*id) {
                wave.push((*id, repo));
            }
        }
    }

    while !wave.is_empty() {
        report.requested += wave.len();
        let mut by_repo: BTreeMap<&str, Vec<CommitId>> = BTreeMap::new();
        for (id, repo) in &wave {
            by_repo.entry(repo).or_default().push(*id);
        }
        let mut next = Vec::new();
        for (repo, ids) in by_repo {
            for (id, result) in provider.get_commits_bulk(repo, &ids) {
                match result {
                    Ok(r) => {
                        match r.source {
                            FetchSource::Cache => report.from_cache += 1,
                            FetchSource::Backend => report.from_backend += 1,
                        }
                        match (r.status, r.commit) {
                            (FetchStatus::Found, Some(commit)) => {
                                for p in &commit.parents {
                                    if queued.insert(*p) {
                                        next.push((*p, repo));
                                    }
                                }
                                resolved.insert(id, commit);
                            }
                            (FetchStatus::TransientError, _) => report.transient.push(id),
                            _ => report.not_found.push(id),
                        }
                    }
                    Err(e) => {
                        report.errors.insert(id, e.to_string());
                    }
                }
            }
        }
        wave = next;
    }

    report.resolved = resolved.len();
    report.not_found.sort_unstable();
    report.transient.sort_unstable();
    if resolved.is_empty() {
        return Err(GraphError::NothingResolved(report.summary()));
    }
    let graph = CommitGraph::from_parts(
        upstream_repo,
        fork_repo,
        resolved.into_values(),
        &upstream_seeds,
        &fork_seeds,
    )?;
    report.frontier = graph.frontier().len();
    if !report.is_complete() {
        log::warn!("{fork_repo}: graph incomplete: {}", report.summary());
    }
    Ok((graph, report))
}
