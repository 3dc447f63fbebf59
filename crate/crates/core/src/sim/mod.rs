//! Synthetic upstream/fork timelines with known port times.
//!
//! [`simulate`] replays a [`SimScript`] through the Git model and returns
//! both histories (dangling commits included), the archive events a hosting
//! service would have published, and a [`TruthLedger`] recording when each
//! upstream patch actually reached the fork.
//!
//! Clock skew shifts commit timestamps of the skewed identity; event and tag
//! timestamps are service-side and never skewed. The ledger always records
//! unskewed instants.

mod output;
mod random;
mod script;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::archive::EventRecord;
use crate::model::{
    payload_digest_of, Commit, CommitId, Identity, ModelError, RepoHistory, Timestamp,
};

pub use output::{
    write_outputs, TruthEntry, TruthLedger, WrittenOutputs, ARCHIVE_SUBDIR, FIXTURE_STORE_FILE,
    TRUTH_FILE, TRUTH_HEADER,
};
pub use random::{random_script, RandomScriptParams};
pub use script::{
    ForkStep, RebaseStep, ScheduleKind, SimScript, TagStep, TagTarget, UpstreamStep, Withheld,
    DEFAULT_SKEW_BOUND,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Archive(#[from] crate::archive::ArchiveError),
}

/// One applied rebase, for inspection by tests and tools.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RebaseLog {
    pub at: Timestamp,
    pub base: CommitId,
    pub mapping: Vec<(CommitId, CommitId)>,
}

/// Everything a simulation produces.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub upstream: RepoHistory,
    pub fork: RepoHistory,
    /// Published events, sorted by `(event_ts, event_id)`.
    pub events: Vec<EventRecord>,
    /// Events that were generated but withheld from the archive.
    pub withheld: Vec<EventRecord>,
    pub rebases: Vec<RebaseLog>,
    pub truth: TruthLedger,
}

impl SimOutput {
    /// One single-commit patch spec per ledger entry.
    pub fn patch_specs(&self) -> Vec<crate::heuristics::PatchSpec> {
        self.truth
            .entries
            .iter()
            .map(|e| crate::heuristics::PatchSpec {
                label: e.label.clone(),
                upstream_commits: vec![e.commit],
                published_date: None,
            })
            .collect()
    }

    /// A backend serving every commit of this run.
    pub fn backend(&self) -> crate::provider::FixtureBackend {
        crate::provider::FixtureBackend::simulator(self.all_commits().map(|(_, c)| c.clone()))
    }

    /// Every commit ever created, tagged with the repository it was pushed to
    /// (upstream first, then fork-only commits).
    pub fn all_commits(&self) -> impl Iterator<Item = (&str, &Commit)> {
        let up = self.upstream.repo_name();
        let fork = self.fork.repo_name();
        self.upstream.commits().map(move |c| (up, c)).chain(
            self.fork
                .commits()
                .filter(|c| !self.upstream.contains(&c.hash))
                .map(move |c| (fork, c)),
        )
    }
}

const EVENT_ID_BASE: u64 = 30_000_000_000;
const LOSS_STREAM: u64 = 0x6c6f_7373_5f72_6e67;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Action {
    Upstream(usize),
    ForkPush(usize),
    Rebase(usize),
    Tag(usize),
}

impl Action {
    fn schedule(self) -> (ScheduleKind, usize) {
        match self {
            Action::Upstream(i) => (ScheduleKind::Upstream, i),
            Action::ForkPush(i) => (ScheduleKind::Fork, i),
            Action::Rebase(i) => (ScheduleKind::Rebase, i),
            Action::Tag(i) => (ScheduleKind::Tag, i),
        }
    }
}

/// Replays `script`. Pure function of the script, seed included.
pub fn simulate(script: &SimScript) -> Result<SimOutput, SimError> {
    script.validate()?;

    let upstream_dev = Identity::new(script.upstream_identity.clone())?;
    let maintainer = Identity::new(script.fork_identity.clone())?;
    let up_skew = script.skew_of(&script.upstream_identity);
    let fork_skew = script.skew_of(&script.fork_identity);

    // Same-instant actions run upstream, fork push, rebase, tag.
    let mut actions: Vec<(i64, Action)> = Vec::new();
    actions.extend(
        script
            .upstream_schedule
            .iter()
            .enumerate()
            .map(|(i, s)| (s.at, Action::Upstream(i))),
    );
    actions.extend(
        script
            .fork_schedule
            .iter()
            .enumerate()
            .map(|(i, s)| (s.at, Action::ForkPush(i))),
    );
    actions.extend(
        script
            .rebase_schedule
            .iter()
            .enumerate()
            .map(|(i, s)| (s.at, Action::Rebase(i))),
    );
    actions.extend(
        script
            .tag_schedule
            .iter()
            .enumerate()
            .map(|(i, s)| (s.at, Action::Tag(i))),
    );
    actions.sort();

    let mut upstream = RepoHistory::new(script.upstream_repo.clone());
    let mut fork: Option<RepoHistory> = None;
    let mut step_heads: Vec<CommitId> = Vec::with_capacity(script.upstream_schedule.len());
    let mut emitted: Vec<(Action, EventRecord)> = Vec::new();
    let mut rebases = Vec::new();
    let mut ledger = TruthLedger::default();
    // Upstream step of each ledger entry.
    let mut patch_steps: Vec<usize> = Vec::new();
    let mut seq = 0u64;
    let mut next_event_id = || {
        let id = (EVENT_ID_BASE + seq).to_string();
        seq += 1;
        id
    };

    for (at, action) in actions {
        match action {
            Action::Upstream(i) => {
                let step = &script.upstream_schedule[i];
                let batch = chain(
                    upstream.head(),
                    &upstream_dev,
                    step.at + up_skew,
                    step.commits,
                    |k| format!("{}/{}/upstream/{i}/{k}", script.seed, script.upstream_repo),
                )?;
                let ids: Vec<CommitId> = batch.iter().map(|c| c.hash).collect();
                upstream.push(batch, &upstream_dev)?;
                let head = *ids.last().unwrap();
                step_heads.push(head);
                if let Some(label) = &step.patch {
                    patch_steps.push(i);
                    ledger.entries.push(TruthEntry {
                        label: label.clone(),
                        commit: head,
                        upstream_author_ts: Timestamp(step.at),
                        port_time: None,
                        tag_time: None,
                        predates_fork: i <= script.fork_point,
                    });
                }
                emitted.push((
                    action,
                    EventRecord::push(next_event_id(), &script.upstream_repo, ids, Timestamp(at)),
                ));
                if i == script.fork_point {
                    fork = Some(upstream.fork(&head, script.fork_repo.clone())?);
                }
            }
            Action::ForkPush(i) => {
                let step = &script.fork_schedule[i];
                let f = fork.as_mut().expect("validated: fork exists");
                let batch = chain(
                    f.head(),
                    &maintainer,
                    step.at + fork_skew,
                    step.commits,
                    |k| format!("{}/{}/fork/{i}/{k}", script.seed, script.fork_repo),
                )?;
                let ids: Vec<CommitId> = batch.iter().map(|c| c.hash).collect();
                f.push(batch, &maintainer)?;
                emitted.push((
                    action,
                    EventRecord::push(next_event_id(), &script.fork_repo, ids, Timestamp(at)),
                ));
            }
            Action::Rebase(i) => {
                let step = &script.rebase_schedule[i];
                let f = fork.as_mut().expect("validated: fork exists");
                let base = step_heads[step.base];
                let outcome = f.rebase(&upstream, &base, Timestamp(at + fork_skew))?;
                for (entry, &patch_step) in ledger.entries.iter_mut().zip(&patch_steps) {
                    if !entry.predates_fork && entry.port_time.is_none() && patch_step <= step.base
                    {
                        entry.port_time = Some(Timestamp(at));
                    }
                }
                let listed = if outcome.mapping.is_empty() {
                    vec![outcome.head]
                } else {
                    outcome.mapping.iter().map(|(_, new)| *new).collect()
                };
                emitted.push((
                    action,
                    EventRecord::push(next_event_id(), &script.fork_repo, listed, Timestamp(at)),
                ));
                rebases.push(RebaseLog {
                    at: Timestamp(at),
                    base,
                    mapping: outcome.mapping,
                });
            }
            Action::Tag(i) => {
                let step = &script.tag_schedule[i];
                let (repo, target) = match step.repo {
                    TagTarget::Fork => {
                        let f = fork.as_mut().expect("validated: fork exists");
                        let head = f.head().expect("fork has a single head");
                        f.tag(step.label.clone(), &head, Timestamp(at))?;
                        for entry in &mut ledger.entries {
                            if entry.port_time.is_some() && entry.tag_time.is_none() {
                                entry.tag_time = Some(Timestamp(at));
                            }
                        }
                        (&script.fork_repo, head)
                    }
                    TagTarget::Upstream => {
                        let head = upstream.head().expect("upstream has a single head");
                        upstream.tag(step.label.clone(), &head, Timestamp(at))?;
                        (&script.upstream_repo, head)
                    }
                };
                emitted.push((
                    action,
                    EventRecord::tag_create(
                        next_event_id(),
                        repo,
                        step.label.clone(),
                        target,
                        Timestamp(at),
                    ),
                ));
            }
        }
    }

    let forced: BTreeSet<(ScheduleKind, usize)> = script
        .withheld
        .iter()
        .map(|w| (w.schedule, w.index))
        .collect();
    let mut loss_rng = ChaCha8Rng::seed_from_u64(script.seed ^ LOSS_STREAM);
    let mut events = Vec::with_capacity(emitted.len());
    let mut withheld = Vec::new();
    for (action, event) in emitted {
        let lost = script.event_loss_rate > 0.0 && loss_rng.random_bool(script.event_loss_rate);
        if lost || forced.contains(&action.schedule()) {
            withheld.push(event);
        } else {
            events.push(event);
        }
    }

    Ok(SimOutput {
        upstream,
        fork: fork.expect("validated: fork_point is inside the schedule"),
        events,
        withheld,
        rebases,
        truth: ledger,
    })
}

/// A pushed chain of `n` commits whose last one is committed at `last_ts`.
fn chain(
    parent: Option<CommitId>,
    who: &Identity,
    last_ts: i64,
    n: usize,
    payload_seed: impl Fn(usize) -> String,
) -> Result<Vec<Commit>, ModelError> {
    let mut out: Vec<Commit> = Vec::with_capacity(n);
    let mut prev = parent;
    for k in 0..n {
        let ts = Timestamp(last_ts - (n - 1 - k) as i64);
        let c = Commit::new(
            prev.into_iter().collect(),
            who.clone(),
            who.clone(),
            ts,
            ts,
            payload_digest_of(payload_seed(k).as_bytes()),
        )?;
        prev = Some(c.hash);
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::EventKind;

    fn one_patch_script() -> SimScript {
        let mut s = SimScript::new(
            7,
            vec![
                UpstreamStep {
                    at: 0,
                    commits: 1,
                    patch: None,
                },
                UpstreamStep {
                    at: 100,
                    commits: 1,
                    patch: Some("P".into()),
                },
            ],
            0,
        );
        s.fork_schedule = vec![ForkStep { at: 50, commits: 2 }];
        s.rebase_schedule = vec![RebaseStep { at: 500, base: 1 }];
        s
    }

    #[test]
    fn single_rebase_sets_port_time() {
        let out = simulate(&one_patch_script()).unwrap();
        let entry = &out.truth.entries[0];
        assert_eq!(entry.port_time, Some(Timestamp(500)));
        assert_eq!(entry.upstream_author_ts, Timestamp(100));
        assert_eq!(out.fork.dangling().len(), 2);
        // one event per upstream step, fork push and rebase
        assert_eq!(out.events.len(), 4);
    }

    #[test]
    fn skew_moves_commit_times_not_events() {
        let mut script = one_patch_script();
        script.skew.insert("fork-maintainer".into(), 3600);
        let out = simulate(&script).unwrap();
        let rebase_event = out.events.last().unwrap();
        assert_eq!(rebase_event.event_ts, Timestamp(500));
        for id in &rebase_event.commit_ids {
            assert_eq!(out.fork.get(id).unwrap().committer_ts, Timestamp(4100));
        }
        assert_eq!(out.truth.entries[0].port_time, Some(Timestamp(500)));
    }

    #[test]
    fn rebase_without_fork_commits_lists_new_head() {
        let mut script = one_patch_script();
        script.fork_schedule.clear();
        let out = simulate(&script).unwrap();
        let ev = out.events.last().unwrap();
        assert_eq!(ev.kind, EventKind::Push);
        assert_eq!(ev.commit_ids, vec![out.upstream.head().unwrap()]);
    }

    #[test]
    fn withheld_event_is_not_published() {
        let mut script = one_patch_script();
        script.withheld.push(Withheld {
            schedule: ScheduleKind::Rebase,
            index: 0,
        });
        let out = simulate(&script).unwrap();
        assert_eq!(out.events.len(), 3);
        assert_eq!(out.withheld.len(), 1);
        assert_eq!(out.withheld[0].event_ts, Timestamp(500));
    }

    #[test]
    fn loss_rate_one_drops_everything_deterministically() {
        let mut script = one_patch_script();
        script.event_loss_rate = 1.0;
        let out = simulate(&script).unwrap();
        assert!(out.events.is_empty());
        assert_eq!(out.withheld.len(), 4);
    }

    #[test]
    fn invalid_scripts_name_the_clause() {
        let mut s = one_patch_script();
        s.rebase_schedule = vec![RebaseStep { at: 500, base: 0 }];
        assert!(
            matches!(simulate(&s), Err(SimError::InvalidScript(m)) if m.contains("after fork_point"))
        );

        let mut s = one_patch_script();
        s.fork_schedule.push(ForkStep { at: 40, commits: 1 });
        assert!(
            matches!(simulate(&s), Err(SimError::InvalidScript(m)) if m.contains("strictly increasing"))
        );

        let mut s = one_patch_script();
        s.skew
            .insert("fork-maintainer".into(), 2 * DEFAULT_SKEW_BOUND);
        assert!(matches!(simulate(&s), Err(SimError::InvalidScript(m)) if m.contains("bound")));

        let mut s = one_patch_script();
        s.fork_point = 9;
        assert!(matches!(simulate(&s), Err(SimError::InvalidScript(_))));

        let mut s = one_patch_script();
        s.rebase_schedule = vec![RebaseStep { at: 60, base: 1 }];
        assert!(
            matches!(simulate(&s), Err(SimError::InvalidScript(m)) if m.contains("does not exist yet"))
        );
    }

    #[test]
    fn toml_round_trip() {
        let script = one_patch_script();
        let back = SimScript::from_toml_str(&script.to_toml_string()).unwrap();
        assert_eq!(back, script);
        assert!(SimScript::from_toml_str("seed = 1\nbogus = 2").is_err());
    }
}
