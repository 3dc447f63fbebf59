//! Patch propagation estimators.
//!
//! Each estimator looks at the fork-only descendants of an upstream patch
//! commit (its nbcc set) and reports the earliest evidence of the patch in
//! the fork, measured from the patch's author timestamp:
//!
//! * PCF: the smallest committer timestamp among those commits;
//! * PEF: the earliest fork push event listing one of them;
//! * PTF: the earliest fork-only tag pointing at one of them.
//!
//! The combined estimate is the smallest of the three. Deltas are whole
//! seconds; conversion to days happens only for display.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{EventIndex, EventKind};
use crate::graph::{CommitGraph, GraphError};
use crate::model::{CommitId, TagRecord, Timestamp};

pub const DAY_SECS: i64 = 86_400;

/// Seconds as fractional days.
pub fn secs_to_days(secs: i64) -> f64 {
    secs as f64 / DAY_SECS as f64
}

/// Whole days, halves rounded up (towards +∞).
pub fn round_days(secs: i64) -> i64 {
    (secs + DAY_SECS / 2).div_euclid(DAY_SECS)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub label: String,
    pub upstream_commits: Vec<CommitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_date: Option<Timestamp>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    #[serde(rename = "PCF")]
    Pcf,
    #[serde(rename = "PEF")]
    Pef,
    #[serde(rename = "PTF")]
    Ptf,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [Heuristic::Pcf, Heuristic::Pef, Heuristic::Ptf];

    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::Pcf => "PCF",
            Heuristic::Pef => "PEF",
            Heuristic::Ptf => "PTF",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One heuristic's answer for one patch commit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub delta_secs: i64,
    /// Commit id, event id or tag label, depending on the heuristic.
    pub witness: String,
    pub witness_ts: Timestamp,
    /// The patch commit the delta is measured from.
    pub patch_commit: CommitId,
}

impl Finding {
    pub fn delta_days(&self) -> f64 {
        secs_to_days(self.delta_secs)
    }

    fn key(&self) -> (i64, &str, CommitId) {
        (self.delta_secs, &self.witness, self.patch_commit)
    }
}

fn earliest(a: Option<Finding>, b: Option<Finding>) -> Option<Finding> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.key() < a.key() { b } else { a }),
        (a, b) => a.or(b),
    }
}

pub fn pcf(graph: &CommitGraph, patch: &CommitId) -> Result<Option<Finding>, GraphError> {
    let base = graph.get(patch).ok_or(GraphError::UnknownCommit(*patch))?;
    Ok(graph
        .nbcc_vertices(patch)?
        .into_iter()
        .map(|v| graph.commit_at(v))
        .min_by_key(|c| (c.committer_ts, c.hash))
        .map(|c| Finding {
            delta_secs: c.committer_ts.0 - base.author_ts.0,
            witness: c.hash.to_hex(),
            witness_ts: c.committer_ts,
            patch_commit: *patch,
        }))
}

pub fn pef(
    graph: &CommitGraph,
    index: &EventIndex,
    patch: &CommitId,
) -> Result<Option<Finding>, GraphError> {
    let base = graph.get(patch).ok_or(GraphError::UnknownCommit(*patch))?;
    let fork = graph.fork_repo();
    Ok(graph
        .nbcc_vertices(patch)?
        .into_iter()
        .flat_map(|v| index.events_for_commit(&graph.commit_at(v).hash))
        .filter(|e| e.kind == EventKind::Push && e.repo_name == fork)
        .min_by(|a, b| (a.event_ts, &a.event_id).cmp(&(b.event_ts, &b.event_id)))
        .map(|e| Finding {
            delta_secs: e.event_ts.0 - base.author_ts.0,
            witness: e.event_id.clone(),
            witness_ts: e.event_ts,
            patch_commit: *patch,
        }))
}

/// Tags of the fork pointing into nbcc, skipping labels upstream also uses.
pub fn ptf(
    graph: &CommitGraph,
    fork_tags: &[TagRecord],
    upstream_tags: &[TagRecord],
    patch: &CommitId,
) -> Result<Option<Finding>, GraphError> {
    let base = graph.get(patch).ok_or(GraphError::UnknownCommit(*patch))?;
    if fork_tags.is_empty() {
        return Ok(None);
    }
    let nbcc: HashSet<CommitId> = graph
        .nbcc_vertices(patch)?
        .into_iter()
        .map(|v| graph.commit_at(v).hash)
        .collect();
    let upstream_labels: HashSet<&str> = upstream_tags.iter().map(|t| t.label.as_str()).collect();
    Ok(fork_tags
        .iter()
        .filter(|t| nbcc.contains(&t.target) && !upstream_labels.contains(t.label.as_str()))
        .min_by(|a, b| (a.timestamp, &a.label).cmp(&(b.timestamp, &b.label)))
        .map(|t| Finding {
            delta_secs: t.timestamp.0 - base.author_ts.0,
            witness: t.label.clone(),
            witness_ts: t.timestamp,
            patch_commit: *patch,
        }))
}

/// Smallest present delta. Equal deltas go to PCF, then PEF, then PTF.
pub fn combine(pcf: Option<i64>, pef: Option<i64>, ptf: Option<i64>) -> Option<(i64, Heuristic)> {
    [
        (pcf, Heuristic::Pcf),
        (pef, Heuristic::Pef),
        (ptf, Heuristic::Ptf),
    ]
    .into_iter()
    .filter_map(|(d, h)| d.map(|d| (d, h)))
    .min()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Found,
    NotPorted,
    PredatesFork,
    GraphIncomplete,
}

impl EstimateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateStatus::Found => "found",
            EstimateStatus::NotPorted => "not_ported",
            EstimateStatus::PredatesFork => "predates_fork",
            EstimateStatus::GraphIncomplete => "graph_incomplete",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// PCF found the patch later than PTF.
    PcfAfterPtf,
    /// PEF found the patch later than PTF.
    PefAfterPtf,
    /// Some fork commit has unresolved ancestry.
    GraphIncomplete,
    /// A patch commit did not resolve.
    PatchUnresolved,
    /// A patch commit is not in the upstream history.
    NotUpstream,
}

impl EstimateFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateFlag::PcfAfterPtf => "pcf_after_ptf",
            EstimateFlag::PefAfterPtf => "pef_after_ptf",
            EstimateFlag::GraphIncomplete => "graph_incomplete",
            EstimateFlag::PatchUnresolved => "patch_unresolved",
            EstimateFlag::NotUpstream => "not_upstream",
        }
    }
}

/// Findings for a single commit of a multi-commit patch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitBreakdown {
    pub commit: CommitId,
    pub resolved: bool,
    pub pcf: Option<Finding>,
    pub pef: Option<Finding>,
    pub ptf: Option<Finding>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combined {
    pub delta_secs: i64,
    pub heuristic: Heuristic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationEstimate {
    pub patch: String,
    pub fork: String,
    pub published_date: Option<Timestamp>,
    /// Earliest author timestamp among the resolved patch commits.
    pub upstream_author_ts: Option<Timestamp>,
    pub pcf: Option<Finding>,
    pub pef: Option<Finding>,
    pub ptf: Option<Finding>,
    pub combined: Option<Combined>,
    pub status: EstimateStatus,
    pub flags: BTreeSet<EstimateFlag>,
    /// Witness time of the combined estimate minus the publication date.
    pub delay_since_publication_secs: Option<i64>,
    pub per_commit: Vec<CommitBreakdown>,
}

impl PropagationEstimate {
    pub fn finding(&self, h: Heuristic) -> Option<&Finding> {
        match h {
            Heuristic::Pcf => self.pcf.as_ref(),
            Heuristic::Pef => self.pef.as_ref(),
            Heuristic::Ptf => self.ptf.as_ref(),
        }
    }

    pub fn delta_secs(&self, h: Heuristic) -> Option<i64> {
        self.finding(h).map(|f| f.delta_secs)
    }

    /// No estimator found the patch and it does not predate the fork.
    pub fn failed(&self) -> bool {
        matches!(
            self.status,
            EstimateStatus::NotPorted | EstimateStatus::GraphIncomplete
        )
    }
}

/// Tags needed by PTF, usually from [`EventIndex::tags_for_repo`].
#[derive(Clone, Debug, Default)]
pub struct TagSets {
    pub fork: Vec<TagRecord>,
    pub upstream: Vec<TagRecord>,
}

impl TagSets {
    pub fn from_index(index: &EventIndex, graph: &CommitGraph) -> Self {
        Self {
            fork: index.tags_for_repo(graph.fork_repo()),
            upstream: index.tags_for_repo(graph.upstream_repo()),
        }
    }
}

/// Runs the three estimators on every commit of `spec`, keeps the earliest
/// finding per estimator, and derives status and flags.
///
/// A patch predates the fork when every resolved patch commit is in the
/// ancestry of the commit the fork started from.
pub fn estimate(
    graph: &CommitGraph,
    index: &EventIndex,
    tags: &TagSets,
    spec: &PatchSpec,
) -> PropagationEstimate {
    let mut flags = BTreeSet::new();
    let mut per_commit = Vec::with_capacity(spec.upstream_commits.len());
    let (mut best_pcf, mut best_pef, mut best_ptf) = (None, None, None);
    for id in &spec.upstream_commits {
        if !graph.contains(id) {
            flags.insert(EstimateFlag::PatchUnresolved);
            per_commit.push(CommitBreakdown {
                commit: *id,
                resolved: false,
                pcf: None,
                pef: None,
                ptf: None,
            });
            continue;
        }
        if !graph.in_upstream(id) {
            flags.insert(EstimateFlag::NotUpstream);
        }
        let found = (
            pcf(graph, id).expect("resolved"),
            pef(graph, index, id).expect("resolved"),
            ptf(graph, &tags.fork, &tags.upstream, id).expect("resolved"),
        );
        best_pcf = earliest(best_pcf, found.0.clone());
        best_pef = earliest(best_pef, found.1.clone());
        best_ptf = earliest(best_ptf, found.2.clone());
        per_commit.push(CommitBreakdown {
            commit: *id,
            resolved: true,
            pcf: found.0,
            pef: found.1,
            ptf: found.2,
        });
    }

    let delta = |f: &Option<Finding>| f.as_ref().map(|f| f.delta_secs);
    if let Some(ptf) = delta(&best_ptf) {
        if delta(&best_pcf).is_some_and(|d| d > ptf) {
            flags.insert(EstimateFlag::PcfAfterPtf);
        }
        if delta(&best_pef).is_some_and(|d| d > ptf) {
            flags.insert(EstimateFlag::PefAfterPtf);
        }
    }
    let incomplete = graph.fork_incomplete();
    if incomplete {
        flags.insert(EstimateFlag::GraphIncomplete);
    }

    let combined = combine(delta(&best_pcf), delta(&best_pef), delta(&best_ptf)).map(
        |(delta_secs, heuristic)| Combined {
            delta_secs,
            heuristic,
        },
    );

    let resolved: Vec<&CommitId> = spec
        .upstream_commits
        .iter()
        .filter(|id| graph.contains(id))
        .collect();
    let predates = !resolved.is_empty()
        && graph.fork_origin().is_some_and(|origin| {
            resolved
                .iter()
                .all(|id| graph.is_ancestor_or_equal(id, &origin))
        });
    let status = if predates {
        EstimateStatus::PredatesFork
    } else if combined.is_some() {
        EstimateStatus::Found
    } else if resolved.len() < spec.upstream_commits.len() || incomplete {
        EstimateStatus::GraphIncomplete
    } else {
        EstimateStatus::NotPorted
    };

    let delay_since_publication_secs = match (&combined, spec.published_date) {
        (Some(c), Some(published)) => {
            let winner = match c.heuristic {
                Heuristic::Pcf => &best_pcf,
                Heuristic::Pef => &best_pef,
                Heuristic::Ptf => &best_ptf,
            };
            winner.as_ref().map(|f| f.witness_ts.0 - published.0)
        }
        _ => None,
    };

    PropagationEstimate {
        patch: spec.label.clone(),
        fork: graph.fork_repo().to_string(),
        published_date: spec.published_date,
        upstream_author_ts: resolved
            .iter()
            .filter_map(|id| graph.get(id))
            .map(|c| c.author_ts)
            .min(),
        pcf: best_pcf,
        pef: best_pef,
        ptf: best_ptf,
        combined,
        status,
        flags,
        delay_since_publication_secs,
        per_commit,
    }
}

/// [`estimate`] for every spec, in parallel, results in spec order.
pub fn estimate_all(
    graph: &CommitGraph,
    index: &EventIndex,
    tags: &TagSets,
    specs: &[PatchSpec],
) -> Vec<PropagationEstimate> {
    specs
        .par_iter()
        .map(|spec| estimate(graph, index, tags, spec))
        .collect()
}
