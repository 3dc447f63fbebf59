use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CommitGraph, GraphError};
use crate::model::{Commit, CommitId};

pub const GRAPH_SCHEMA: &str = "gitwatch-graph/1";

/// Serialized form of a [`CommitGraph`]. The schema tag comes first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub schema: String,
    pub upstream_repo: String,
    pub fork_repo: String,
    pub vertices: Vec<Commit>,
    /// `(parent, child)` pairs.
    pub edges: Vec<(CommitId, CommitId)>,
    pub upstream_set: BTreeSet<CommitId>,
    pub fork_set: BTreeSet<CommitId>,
    pub frontier: BTreeMap<CommitId, usize>,
    pub fork_seed_missing: bool,
}

impl CommitGraph {
    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            schema: GRAPH_SCHEMA.to_string(),
            upstream_repo: self.upstream_repo.clone(),
            fork_repo: self.fork_repo.clone(),
            vertices: self.commits.clone(),
            edges: self.edges().collect(),
            upstream_set: self.upstream_set(),
            fork_set: self.fork_set(),
            frontier: self.frontier.clone(),
            fork_seed_missing: self.fork_seed_missing,
        }
    }

    /// Rebuilds the graph and checks the stored edges and membership sets
    /// against it.
    pub fn from_snapshot(snapshot: GraphSnapshot) -> Result<Self, GraphError> {
        if snapshot.schema != GRAPH_SCHEMA {
            return Err(GraphError::BadSnapshot(format!(
                "schema `{}`, expected `{GRAPH_SCHEMA}`",
                snapshot.schema
            )));
        }
        let upstream_seeds: Vec<CommitId> = snapshot.upstream_set.iter().copied().collect();
        let fork_seeds: Vec<CommitId> = snapshot.fork_set.iter().copied().collect();
        let mut graph = CommitGraph::from_parts(
            snapshot.upstream_repo,
            snapshot.fork_repo,
            snapshot.vertices,
            &upstream_seeds,
            &fork_seeds,
        )?;
        let edges: Vec<(CommitId, CommitId)> = graph.edges().collect();
        if edges != snapshot.edges {
            return Err(GraphError::BadSnapshot(
                "edge list does not match vertices".into(),
            ));
        }
        if graph.upstream_set() != snapshot.upstream_set || graph.fork_set() != snapshot.fork_set {
            return Err(GraphError::BadSnapshot(
                "membership sets are not closed under ancestry".into(),
            ));
        }
        graph.frontier = snapshot.frontier;
        graph.fork_seed_missing = snapshot.fork_seed_missing;
        Ok(graph)
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<(), GraphError> {
        let io = |source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let text = serde_json::to_string(&self.to_snapshot()).expect("snapshot serializes");
        fs::write(path, text).map_err(io)
    }

    pub fn read_snapshot(path: &Path) -> Result<Self, GraphError> {
        let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let snapshot: GraphSnapshot =
            serde_json::from_str(&text).map_err(|e| GraphError::BadSnapshot(e.to_string()))?;
        Self::from_snapshot(snapshot)
    }
}
