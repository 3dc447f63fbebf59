#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use gitwatch_core::archive::{build_event_index, ingest_dir, RepoFilter};
use gitwatch_core::heuristics::PropagationEstimate;
use gitwatch_core::provider::{FixtureBackend, Provider, ProviderConfig};
use gitwatch_core::report::analyze_fork;
use gitwatch_core::sim::SimScript;

/// A fix whose pickup by a fork was measured by hand: the (PCF, PEF, PTF)
/// day counts and the hand-verified delay.
pub struct KnownDelay {
    pub name: &'static str,
    pub patch: &'static str,
    pub fork: &'static str,
    pub triple: (i64, i64, i64),
    pub actual_days: i64,
}

pub const KNOWN_DELAYS: [KnownDelay; 5] = [
    KnownDelay {
        name: "bip65_litecoin",
        patch: "BIP65",
        fork: "litecoin-project/litecoin",
        triple: (159, 160, 181),
        actual_days: 179,
    },
    KnownDelay {
        name: "bip65_dogecoin",
        patch: "BIP65",
        fork: "dogecoin/dogecoin",
        triple: (244, 147, 958),
        actual_days: 958,
    },
    KnownDelay {
        name: "bip66_dogecoin",
        patch: "BIP66",
        fork: "dogecoin/dogecoin",
        triple: (142, 142, 194),
        actual_days: 194,
    },
    KnownDelay {
        name: "cve_2013_4627_litecoin",
        patch: "CVE-2013-4627",
        fork: "litecoin-project/litecoin",
        triple: (17, 45, 18),
        actual_days: 33,
    },
    KnownDelay {
        name: "cve_2013_4165_litecoin",
        patch: "CVE-2013-4165",
        fork: "litecoin-project/litecoin",
        triple: (10, 529, 13),
        actual_days: 28,
    },
];

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/known_delays")
}

impl KnownDelay {
    pub fn script_path(&self) -> PathBuf {
        fixtures_dir().join(format!("{}.toml", self.name))
    }

    pub fn corpus_dir(&self) -> PathBuf {
        fixtures_dir().join(self.name)
    }

    pub fn script(&self) -> SimScript {
        SimScript::load(&self.script_path()).unwrap()
    }

    /// Replays the checked-in corpus: archive ingest, fixture commit store,
    /// graph build and estimation.
    pub fn replay(&self) -> (PropagationEstimate, Vec<String>) {
        let script = self.script();
        let dir = self.corpus_dir();
        let filter = RepoFilter::only([script.upstream_repo.clone(), script.fork_repo.clone()]);
        let (events, stats) = ingest_dir(&dir.join("archive"), &filter).unwrap();
        assert_eq!(stats.skipped(), 0, "{}", self.name);
        let index = build_event_index(events);
        let backend = FixtureBackend::load(&dir.join("commits.jsonl")).unwrap();
        let provider = Provider::new(&ProviderConfig::default(), Box::new(backend)).unwrap();

        let text = fs::read_to_string(dir.join("truth.tsv")).unwrap();
        let row = truth_row(&text, self.patch);
        let spec = gitwatch_core::heuristics::PatchSpec {
            label: self.patch.to_string(),
            upstream_commits: vec![row[1].parse().unwrap()],
            published_date: None,
        };
        let (_, analysis) = analyze_fork(
            &index,
            &script.upstream_repo,
            &script.fork_repo,
            &provider,
            &[spec],
        )
        .unwrap();
        (analysis.estimates.into_iter().next().unwrap(), row)
    }
}

/// Cells of the truth-file row for `label`: label, commit, upstream author
/// time, port time, tag time.
pub fn truth_row(text: &str, label: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('\t').map(str::to_string).collect::<Vec<_>>())
        .find(|cells| cells[0] == label)
        .unwrap_or_else(|| panic!("no truth row for {label}"))
}
