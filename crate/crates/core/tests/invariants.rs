use std::collections::HashSet;

use gitwatch_core::archive::{build_event_index, ingest_reader, EventIndex, RepoFilter};
use gitwatch_core::graph::build_graph;
use gitwatch_core::heuristics::{round_days, DAY_SECS};
use gitwatch_core::model::Timestamp;
use gitwatch_core::provider::{CacheEntry, CommitCache, Provider, ProviderConfig};
use gitwatch_core::sim::{random_script, simulate, RandomScriptParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn simulated_histories_are_valid(seed in any::<u64>()) {
        let script = random_script(seed, &RandomScriptParams::default());
        let out = simulate(&script).unwrap();
        out.upstream.validate().unwrap();
        out.fork.validate().unwrap();
        for c in out.fork.commits().chain(out.upstream.commits()) {
            c.verify().unwrap();
            prop_assert!(c.committer_ts >= c.author_ts);
        }
        for log in &out.rebases {
            for (old, new) in &log.mapping {
                prop_assert!(out.fork.dangling().contains(old));
                prop_assert_eq!(out.fork.get(new).unwrap().committer_ts, log.at);
            }
        }
        let ids: Vec<_> = out.events.iter().map(|e| &e.event_id).collect();
        let unique: HashSet<_> = ids.iter().collect();
        prop_assert_eq!(ids.len(), unique.len());
        prop_assert!(out.events.windows(2).all(|w| (w[0].event_ts, &w[0].event_id) <= (w[1].event_ts, &w[1].event_id)));
    }

    #[test]
    fn graph_sets_are_closed_under_ancestry(seed in any::<u64>()) {
        let script = random_script(seed, &RandomScriptParams::default());
        let out = simulate(&script).unwrap();
        let index = build_event_index(out.events.clone());
        let provider = Provider::new(&ProviderConfig::default(), Box::new(out.backend())).unwrap();
        let (graph, report) = build_graph(&index, &script.upstream_repo, &script.fork_repo, &provider).unwrap();
        prop_assert!(report.is_complete());
        for c in graph.commits() {
            for p in &c.parents {
                if graph.in_upstream(&c.hash) {
                    prop_assert!(graph.in_upstream(p));
                }
                if graph.in_fork(&c.hash) {
                    prop_assert!(graph.in_fork(p));
                }
                prop_assert!(graph.is_ancestor_or_equal(p, &c.hash));
            }
        }
        for id in out.fork.dangling() {
            prop_assert!(graph.contains(&id), "dangling {} missing", id);
        }
    }

    #[test]
    fn event_index_round_trips_through_jsonl(seed in any::<u64>()) {
        let script = random_script(seed, &RandomScriptParams::default());
        let out = simulate(&script).unwrap();
        let index = build_event_index(out.events.clone());
        let mut buf = Vec::new();
        index.write_jsonl(&mut buf).unwrap();
        let back = EventIndex::read_jsonl(&buf[..]).unwrap();
        prop_assert_eq!(back.events(), index.events());
        for e in index.events() {
            for c in &e.commit_ids {
                prop_assert!(index.events_for_commit(c).any(|x| x.event_id == e.event_id));
            }
        }
    }

    #[test]
    fn ingest_never_aborts_on_arbitrary_bytes(lines in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..200), 0..50)) {
        let mut corpus = Vec::new();
        for l in &lines {
            corpus.extend(l.iter().filter(|b| **b != b'\n'));
            corpus.push(b'\n');
        }
        let (events, stats) = ingest_reader(&corpus[..], &RepoFilter::all());
        prop_assert_eq!(stats.lines_read, lines.len() as u64);
        prop_assert_eq!(stats.matched + stats.skipped(), stats.lines_read);
        prop_assert_eq!(events.len() as u64, stats.matched);
    }

    #[test]
    fn round_days_is_nearest_day(secs in -10_000 * DAY_SECS..10_000 * DAY_SECS) {
        let d = round_days(secs);
        prop_assert!((secs - d * DAY_SECS).abs() <= DAY_SECS / 2);
        prop_assert_eq!(round_days(d * DAY_SECS), d);
        prop_assert!(round_days(secs + 1) >= d);
    }

    #[test]
    fn timestamps_round_trip_through_iso8601(secs in 0i64..4_000_000_000) {
        let t = Timestamp(secs);
        prop_assert_eq!(Timestamp::parse_iso8601(&t.to_iso8601()), Some(t));
        let midnight = Timestamp::parse_date(&t.to_date()).unwrap();
        prop_assert!(midnight <= t && t.0 - midnight.0 < DAY_SECS);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn disk_cache_returns_what_was_stored(seed in any::<u64>(), take in 1usize..20) {
        let out = simulate(&random_script(seed, &RandomScriptParams::default())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cache = CommitCache::on_disk(dir.path());
        let commits: Vec<_> = out.upstream.commits().take(take).cloned().collect();
        for c in &commits {
            cache.store(CacheEntry::found("a/b", c.clone(), Timestamp(1), "test")).unwrap();
        }
        let fresh = CommitCache::on_disk(dir.path());
        for c in &commits {
            let e = fresh.load("a/b", &c.hash).unwrap();
            prop_assert_eq!(e.commit.as_ref(), Some(c));
            prop_assert!(fresh.load("other/repo", &c.hash).is_none());
        }
        prop_assert_eq!(fresh.scan().unwrap().len(), commits.len());
    }
}
