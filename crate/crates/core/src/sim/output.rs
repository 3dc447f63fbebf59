use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{SimError, SimOutput};
use crate::archive::write_archive;
use crate::model::{CommitId, Timestamp};
use crate::provider::write_fixture_store;

/// Ground truth for one upstream patch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthEntry {
    pub label: String,
    pub commit: CommitId,
    pub upstream_author_ts: Timestamp,
    /// The rebase instant that first made the patch reachable from the fork head.
    pub port_time: Option<Timestamp>,
    /// First fork tag at or after the port.
    pub tag_time: Option<Timestamp>,
    /// The patch was already in the history the fork started from.
    pub predates_fork: bool,
}

impl TruthEntry {
    /// Port delay in seconds, when the patch was ported after the fork.
    pub fn port_delay(&self) -> Option<i64> {
        self.port_time.map(|t| t.0 - self.upstream_author_ts.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TruthLedger {
    pub entries: Vec<TruthEntry>,
}

pub const TRUTH_HEADER: &str = "label\tcommit\tupstream_author_ts\tport_time\ttag_time";

impl TruthLedger {
    pub fn get(&self, label: &str) -> Option<&TruthEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Tab-separated text: a header line, then one line per patch. Port and
    /// tag times read `NA` for patches that predate the fork and `-` when the
    /// event never happened.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(TRUTH_HEADER);
        out.push('\n');
        for e in &self.entries {
            let cell = |t: Option<Timestamp>| match (e.predates_fork, t) {
                (true, _) => "NA".to_string(),
                (false, Some(t)) => t.0.to_string(),
                (false, None) => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.label,
                e.commit,
                e.upstream_author_ts.0,
                cell(e.port_time),
                cell(e.tag_time)
            );
        }
        out
    }
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug)]
pub struct WrittenOutputs {
    pub archive_files: Vec<PathBuf>,
    pub fixture_store: PathBuf,
    pub truth: PathBuf,
}

pub const ARCHIVE_SUBDIR: &str = "archive";
pub const FIXTURE_STORE_FILE: &str = "commits.jsonl";
pub const TRUTH_FILE: &str = "truth.tsv";

/// Writes `dir/archive/*.json.gz`, `dir/commits.jsonl` (every commit ever
/// created, dangling ones included) and `dir/truth.tsv`.
pub fn write_outputs(out: &SimOutput, dir: &Path) -> Result<WrittenOutputs, SimError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let archive_dir = dir.join(ARCHIVE_SUBDIR);
    if archive_dir.exists() {
        // Stale hours from an earlier run would otherwise survive.
        fs::remove_dir_all(&archive_dir).map_err(io(&archive_dir))?;
    }
    let archive_files = write_archive(&out.events, &archive_dir)?;

    let fixture_store = dir.join(FIXTURE_STORE_FILE);
    write_fixture_store(out.all_commits(), &fixture_store).map_err(io(&fixture_store))?;

    let truth = dir.join(TRUTH_FILE);
    fs::write(&truth, out.truth.to_tsv()).map_err(io(&truth))?;

    Ok(WrittenOutputs {
        archive_files,
        fixture_store,
        truth,
    })
}
