use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use super::{ArchiveError, EventKind, EventRecord};
use crate::model::{CommitId, TagRecord};

/// Time-ordered events per repository plus the commit → events map.
///
/// Events are kept sorted by `(event_ts, event_id)`. For every event `e` and
/// every commit `c` listed in `e`, `events_for_commit(c)` yields `e`, and
/// nothing else is in that map.
#[derive(Clone, Debug, Default)]
pub struct EventIndex {
    events: Vec<EventRecord>,
    by_repo: BTreeMap<String, Vec<usize>>,
    by_commit: HashMap<CommitId, Vec<usize>>,
    by_id: HashMap<String, usize>,
    duplicates_dropped: usize,
}

/// Builds the index, dropping repeated event ids (first occurrence wins).
pub fn build_event_index<I>(events: I) -> EventIndex
where
    I: IntoIterator<Item = EventRecord>,
{
    let mut seen = HashSet::new();
    let mut duplicates_dropped = 0;
    let mut kept: Vec<EventRecord> = Vec::new();
    for e in events {
        if seen.insert(e.event_id.clone()) {
            kept.push(e);
        } else {
            duplicates_dropped += 1;
        }
    }
    kept.sort_by(|a, b| (a.event_ts, &a.event_id).cmp(&(b.event_ts, &b.event_id)));

    let mut by_repo: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut by_commit: HashMap<CommitId, Vec<usize>> = HashMap::new();
    let mut by_id = HashMap::with_capacity(kept.len());
    for (i, e) in kept.iter().enumerate() {
        by_repo.entry(e.repo_name.clone()).or_default().push(i);
        by_id.insert(e.event_id.clone(), i);
        let mut listed = HashSet::new();
        for c in &e.commit_ids {
            if listed.insert(*c) {
                by_commit.entry(*c).or_default().push(i);
            }
        }
    }
    EventIndex {
        events: kept,
        by_repo,
        by_commit,
        by_id,
        duplicates_dropped,
    }
}

impl EventIndex {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// All events, sorted by `(event_ts, event_id)`.
    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn repos(&self) -> impl Iterator<Item = &str> {
        self.by_repo.keys().map(String::as_str)
    }

    pub fn get(&self, event_id: &str) -> Option<&EventRecord> {
        self.by_id.get(event_id).map(|&i| &self.events[i])
    }

    pub fn events_for_repo<'a>(&'a self, repo: &str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.by_repo
            .get(repo)
            .into_iter()
            .flatten()
            .map(move |&i| &self.events[i])
    }

    /// Events listing `commit`, oldest first.
    pub fn events_for_commit<'a>(
        &'a self,
        commit: &CommitId,
    ) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.by_commit
            .get(commit)
            .into_iter()
            .flatten()
            .map(move |&i| &self.events[i])
    }

    pub fn event_ids_for_commit(&self, commit: &CommitId) -> Vec<&str> {
        self.events_for_commit(commit)
            .map(|e| e.event_id.as_str())
            .collect()
    }

    /// Distinct commit ids referenced by `repo`'s events, first-seen order.
    pub fn commit_ids_for_repo(&self, repo: &str) -> Vec<CommitId> {
        let mut seen = HashSet::new();
        self.events_for_repo(repo)
            .flat_map(|e| e.commit_ids.iter().copied())
            .filter(|c| seen.insert(*c))
            .collect()
    }

    /// Tags created in `repo`, timestamped with the creation event.
    pub fn tags_for_repo(&self, repo: &str) -> Vec<TagRecord> {
        self.events_for_repo(repo)
            .filter(|e| e.kind == EventKind::TagCreate)
            .filter_map(|e| {
                let label = e.label.clone()?;
                let target = *e.commit_ids.first()?;
                TagRecord::new(label, e.event_ts, target).ok()
            })
            .collect()
    }

    /// Writes the events as JSON lines in index order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, ArchiveError> {
        let mut events = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ArchiveError::BadIndex {
                line: n + 1,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let e: EventRecord =
                serde_json::from_str(&line).map_err(|e| ArchiveError::BadIndex {
                    line: n + 1,
                    reason: e.to_string(),
                })?;
            events.push(e);
        }
        Ok(build_event_index(events))
    }
}
