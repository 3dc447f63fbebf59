//! Event-archive ingestion: hourly, line-delimited, optionally gzip-compressed
//! files in the GH-archive schema.
//!
//! Only push events and tag creations are kept. Bad lines are counted and
//! skipped; a file is rejected only when it cannot be opened.

mod index;
mod wire;

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Timelike};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{CommitId, Timestamp};
use wire::Decoded;

pub use index::{build_event_index, EventIndex};
pub use wire::PUSH_COMMIT_LIMIT;

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no input files in {0}")]
    NoInputFiles(PathBuf),
    #[error("events must be sorted by timestamp (event {0} is out of order)")]
    Unsorted(String),
    #[error("malformed event index line {line}: {reason}")]
    BadIndex { line: usize, reason: String },
}

impl ArchiveError {
    fn io(path: &Path, source: io::Error) -> Self {
        ArchiveError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Push,
    TagCreate,
}

/// An archive event: ordered commit ids plus the service-side timestamp.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: String,
    pub repo_name: String,
    pub kind: EventKind,
    /// Pushed commits oldest first, or the single tag target.
    pub commit_ids: Vec<CommitId>,
    /// Tag label, present only for tag creations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub event_ts: Timestamp,
}

impl EventRecord {
    pub fn push(
        event_id: impl Into<String>,
        repo_name: impl Into<String>,
        commit_ids: Vec<CommitId>,
        event_ts: Timestamp,
    ) -> Self {
        debug_assert!(
            !commit_ids.is_empty(),
            "push events carry at least one commit"
        );
        Self {
            event_id: event_id.into(),
            repo_name: repo_name.into(),
            kind: EventKind::Push,
            commit_ids,
            label: None,
            event_ts,
        }
    }

    pub fn tag_create(
        event_id: impl Into<String>,
        repo_name: impl Into<String>,
        label: impl Into<String>,
        target: CommitId,
        event_ts: Timestamp,
    ) -> Self {
        Self {
            event_id: event_id.into(),
            repo_name: repo_name.into(),
            kind: EventKind::TagCreate,
            commit_ids: vec![target],
            label: Some(label.into()),
            event_ts,
        }
    }

    /// Push events list commits; tag creations carry a label.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            EventKind::Push => !self.commit_ids.is_empty() && self.label.is_none(),
            EventKind::TagCreate => {
                self.commit_ids.len() == 1 && self.label.as_deref().is_some_and(|l| !l.is_empty())
            }
        }
    }
}

/// Per-file (or aggregated) ingestion counters.
///
/// Every line read lands in exactly one of `matched` or a `skipped_*` bucket.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub files: usize,
    pub lines_read: u64,
    pub matched: u64,
    pub skipped_malformed: u64,
    pub skipped_other_kind: u64,
    pub skipped_other_repo: u64,
    pub skipped_duplicate: u64,
    pub skipped_tag_without_target: u64,
    /// Matched push events whose commit list the service truncated.
    pub truncated_pushes: u64,
}

impl IngestStats {
    pub fn skipped(&self) -> u64 {
        self.skipped_malformed
            + self.skipped_other_kind
            + self.skipped_other_repo
            + self.skipped_duplicate
            + self.skipped_tag_without_target
    }

    pub fn is_balanced(&self) -> bool {
        self.matched + self.skipped() == self.lines_read
    }

    pub fn absorb(&mut self, other: &IngestStats) {
        self.files += other.files;
        self.lines_read += other.lines_read;
        self.matched += other.matched;
        self.skipped_malformed += other.skipped_malformed;
        self.skipped_other_kind += other.skipped_other_kind;
        self.skipped_other_repo += other.skipped_other_repo;
        self.skipped_duplicate += other.skipped_duplicate;
        self.skipped_tag_without_target += other.skipped_tag_without_target;
        self.truncated_pushes += other.truncated_pushes;
    }

    /// One-line summary for terminals and logs.
    pub fn summary(&self) -> String {
        format!(
            "files={} lines={} matched={} malformed={} other_kind={} other_repo={} duplicate={} tag_without_target={} truncated_pushes={}",
            self.files,
            self.lines_read,
            self.matched,
            self.skipped_malformed,
            self.skipped_other_kind,
            self.skipped_other_repo,
            self.skipped_duplicate,
            self.skipped_tag_without_target,
            self.truncated_pushes
        )
    }
}

/// Repositories to keep. An empty filter keeps every repository.
#[derive(Clone, Debug, Default)]
pub struct RepoFilter(BTreeSet<String>);

impl RepoFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn only<I, S>(repos: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(repos.into_iter().map(Into::into).collect())
    }

    pub fn accepts(&self, repo: &str) -> bool {
        self.0.is_empty() || self.0.contains(repo)
    }
}

/// Parses one archive file. Gzip input is detected by its magic bytes.
pub fn ingest_file(
    path: &Path,
    filter: &RepoFilter,
) -> Result<(Vec<EventRecord>, IngestStats), ArchiveError> {
    let mut file = File::open(path).map_err(|e| ArchiveError::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = read_prefix(&mut file, &mut magic).map_err(|e| ArchiveError::io(path, e))?;
    let head = io::Cursor::new(magic[..n].to_vec());
    let reader: Box<dyn Read> = if n == 2 && magic == [0x1f, 0x8b] {
        Box::new(MultiGzDecoder::new(head.chain(file)))
    } else {
        Box::new(head.chain(file))
    };
    let (events, mut stats) = ingest_reader(BufReader::new(reader), filter);
    stats.files = 1;
    Ok((events, stats))
}

fn read_prefix(file: &mut File, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

/// Parses line-delimited records from any reader.
///
/// A read failure part-way through (for example a truncated gzip stream) is
/// counted as one malformed line and ends the input.
pub fn ingest_reader<R: BufRead>(
    mut reader: R,
    filter: &RepoFilter,
) -> (Vec<EventRecord>, IngestStats) {
    let mut stats = IngestStats::default();
    let mut events = Vec::new();
    let mut seen = HashSet::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => break,
            Ok(_) => {}
            Err(_) => {
                stats.lines_read += 1;
                stats.skipped_malformed += 1;
                break;
            }
        }
        stats.lines_read += 1;
        let Ok(line) = std::str::from_utf8(&buf) else {
            stats.skipped_malformed += 1;
            continue;
        };
        match wire::decode_line(line.trim_end_matches(['\n', '\r'])) {
            Decoded::Malformed => stats.skipped_malformed += 1,
            Decoded::OtherKind => stats.skipped_other_kind += 1,
            Decoded::TagWithoutTarget { repo } => {
                if filter.accepts(&repo) {
                    stats.skipped_tag_without_target += 1;
                } else {
                    stats.skipped_other_repo += 1;
                }
            }
            Decoded::Event { record, truncated } => {
                if !filter.accepts(&record.repo_name) {
                    stats.skipped_other_repo += 1;
                } else if !seen.insert(record.event_id.clone()) {
                    stats.skipped_duplicate += 1;
                } else {
                    stats.matched += 1;
                    if truncated {
                        stats.truncated_pushes += 1;
                    }
                    events.push(record);
                }
            }
        }
    }
    (events, stats)
}

/// Archive files under `dir`, ordered by the hour encoded in their name.
pub fn archive_files(dir: &Path) -> Result<Vec<PathBuf>, ArchiveError> {
    let entries = std::fs::read_dir(dir).map_err(|e| ArchiveError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| ArchiveError::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if path.is_file() && (name.ends_with(".json") || name.ends_with(".json.gz")) {
            files.push(path);
        }
    }
    files.sort_by_cached_key(|p| {
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        (hour_of_file_name(&name), name)
    });
    Ok(files)
}

/// Ingests every archive file in `dir`, in parallel, concatenated in hour order.
pub fn ingest_dir(
    dir: &Path,
    filter: &RepoFilter,
) -> Result<(Vec<EventRecord>, IngestStats), ArchiveError> {
    let files = archive_files(dir)?;
    if files.is_empty() {
        return Err(ArchiveError::NoInputFiles(dir.to_path_buf()));
    }
    let parts = files
        .par_iter()
        .map(|f| ingest_file(f, filter))
        .collect::<Result<Vec<_>, _>>()?;
    let mut events = Vec::new();
    let mut stats = IngestStats::default();
    for (evs, s) in parts {
        events.extend(evs);
        stats.absorb(&s);
    }
    Ok((events, stats))
}

/// `YYYY-MM-DD-H` (hour not zero-padded) as used by the public archive.
pub fn archive_file_stem(hour_start: Timestamp) -> String {
    match DateTime::from_timestamp(hour_start.0, 0) {
        Some(dt) => format!("{}-{}", dt.format("%Y-%m-%d"), dt.hour()),
        None => format!("hour-{}", hour_start.0.div_euclid(3600)),
    }
}

fn hour_of_file_name(name: &str) -> Option<i64> {
    let stem = name.strip_suffix(".gz").unwrap_or(name);
    let stem = stem.strip_suffix(".json")?;
    let (date, hour) = stem.rsplit_once('-')?;
    let hour: u32 = hour.parse().ok()?;
    let dt = NaiveDateTime::parse_from_str(&format!("{date} {hour:02}:00:00"), "%Y-%m-%d %H:%M:%S")
        .ok()?;
    Some(dt.and_utc().timestamp())
}

/// Writes `events` as gzip-compressed hourly files and returns the paths in
/// hour order. Output is byte-for-byte deterministic.
pub fn write_archive(events: &[EventRecord], dir: &Path) -> Result<Vec<PathBuf>, ArchiveError> {
    if let Some(w) = events.windows(2).find(|w| w[1].event_ts < w[0].event_ts) {
        return Err(ArchiveError::Unsorted(w[1].event_id.clone()));
    }
    std::fs::create_dir_all(dir).map_err(|e| ArchiveError::io(dir, e))?;
    let mut paths = Vec::new();
    for chunk in
        events.chunk_by(|a, b| a.event_ts.0.div_euclid(3600) == b.event_ts.0.div_euclid(3600))
    {
        let hour = Timestamp(chunk[0].event_ts.0.div_euclid(3600) * 3600);
        let path = dir.join(format!("{}.json.gz", archive_file_stem(hour)));
        let file = File::create(&path).map_err(|e| ArchiveError::io(&path, e))?;
        let mut gz = GzEncoder::new(BufWriter::new(file), Compression::default());
        for event in chunk {
            gz.write_all(wire::encode_line(event).as_bytes())
                .and_then(|_| gz.write_all(b"\n"))
                .map_err(|e| ArchiveError::io(&path, e))?;
        }
        gz.finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| ArchiveError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
