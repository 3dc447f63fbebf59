use std::collections::HashSet;

use gitwatch_core::archive::{build_event_index, ingest_dir, RepoFilter};
use gitwatch_core::heuristics::{EstimateStatus, Heuristic};
use gitwatch_core::provider::{FixtureBackend, Provider, ProviderConfig};
use gitwatch_core::report::analyze_fork;
use gitwatch_core::sim::{random_script, simulate, write_outputs, RandomScriptParams};

#[test]
fn write_then_ingest_then_analyze_matches_truth() {
    let dir = tempfile::tempdir().unwrap();
    let script = random_script(42, &RandomScriptParams::default());
    let out = simulate(&script).unwrap();
    let written = write_outputs(&out, dir.path()).unwrap();

    let filter = RepoFilter::only([script.upstream_repo.clone(), script.fork_repo.clone()]);
    let (events, stats) = ingest_dir(&dir.path().join("archive"), &filter).unwrap();
    assert_eq!(events, out.events);
    assert_eq!(stats.skipped(), 0);
    let index = build_event_index(events);

    let backend = FixtureBackend::load(&written.fixture_store).unwrap();
    let provider = Provider::new(&ProviderConfig::default(), Box::new(backend)).unwrap();
    let (graph, analysis) = analyze_fork(
        &index,
        &script.upstream_repo,
        &script.fork_repo,
        &provider,
        &out.patch_specs(),
    )
    .unwrap();

    let all: HashSet<_> = out.all_commits().map(|(_, c)| c.hash).collect();
    let vertices: HashSet<_> = graph.commits().iter().map(|c| c.hash).collect();
    assert_eq!(vertices, all);

    for (entry, est) in out.truth.entries.iter().zip(&analysis.estimates) {
        if entry.predates_fork {
            assert_eq!(est.status, EstimateStatus::PredatesFork, "{}", entry.label);
            continue;
        }
        match entry.port_delay() {
            Some(delay) => {
                assert_eq!(est.status, EstimateStatus::Found, "{}", entry.label);
                assert_eq!(est.delta_secs(Heuristic::Pef), Some(delay));
                assert_eq!(est.delta_secs(Heuristic::Pcf), Some(delay));
            }
            None => assert_eq!(est.status, EstimateStatus::NotPorted, "{}", entry.label),
        }
    }
}

#[test]
fn simulator_backend_resolves_dangling_commits_with_old_times() {
    let script = random_script(7, &RandomScriptParams::default());
    let out = simulate(&script).unwrap();
    let provider = Provider::new(&ProviderConfig::default(), Box::new(out.backend())).unwrap();
    let log = &out.rebases[0];
    for (old, new) in &log.mapping {
        let fetched = provider
            .get_commit(&script.fork_repo, old)
            .unwrap()
            .commit
            .unwrap();
        assert!(fetched.committer_ts < log.at);
        assert_eq!(
            provider
                .get_commit(&script.fork_repo, new)
                .unwrap()
                .commit
                .unwrap()
                .committer_ts,
            log.at
        );
    }
}
