//! In-memory model of the Git operations the estimators depend on: commits,
//! tags, push, fork and rebase.
//!
//! Commit contents are represented only by a [`PayloadDigest`]. Commit ids are
//! a truncated SHA-256 over a length-prefixed encoding of the metadata and the
//! payload digest; they are not Git object ids. Commits that arrive from a
//! hosting service keep the id they were fetched under.

mod history;
mod id;

use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use history::{RebaseOutcome, RepoHistory};
pub use id::{CommitId, PayloadDigest};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed id `{0}`: expected 40 lowercase hex characters")]
    MalformedId(String),
    #[error("identity must be non-empty")]
    EmptyIdentity,
    #[error("tag label must be non-empty")]
    EmptyLabel,
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("unknown parent {0}")]
    UnknownParent(CommitId),
    #[error("unknown commit {0}")]
    UnknownCommit(CommitId),
    #[error("divergence point is ambiguous: {0}")]
    AmbiguousBase(String),
    #[error("duplicate tag label `{0}`")]
    DuplicateLabel(String),
    #[error("commit graph contains a cycle through {0}")]
    Cycle(CommitId),
}

/// Seconds since the Unix epoch, UTC.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const fn seconds(self) -> i64 {
        self.0
    }

    pub fn to_datetime(self) -> Option<DateTime<Utc>> {
        DateTime::from_timestamp(self.0, 0)
    }

    /// `YYYY-MM-DDTHH:MM:SSZ`.
    pub fn to_iso8601(self) -> String {
        self.to_datetime()
            .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
            .unwrap_or_else(|| self.0.to_string())
    }

    /// `YYYY-MM-DD`.
    pub fn to_date(self) -> String {
        self.to_datetime()
            .map(|dt| dt.format("%Y-%m-%d").to_string())
            .unwrap_or_else(|| self.0.to_string())
    }

    /// Parses an RFC 3339 / ISO-8601 instant with any offset and normalizes it to UTC.
    pub fn parse_iso8601(s: &str) -> Option<Self> {
        DateTime::parse_from_rfc3339(s.trim())
            .ok()
            .map(|dt| Timestamp(dt.timestamp()))
    }

    /// Parses a bare `YYYY-MM-DD` date as midnight UTC.
    pub fn parse_date(s: &str) -> Option<Self> {
        chrono::NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|dt| Timestamp(dt.and_utc().timestamp()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::ops::Add<i64> for Timestamp {
    type Output = Timestamp;

    fn add(self, rhs: i64) -> Timestamp {
        Timestamp(self.0 + rhs)
    }
}

/// Author or committer name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Identity(String);

impl Identity {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ModelError::EmptyIdentity);
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Identity {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Identity::new(value)
    }
}

impl From<Identity> for String {
    fn from(value: Identity) -> Self {
        value.0
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Commit metadata record.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Commit {
    pub hash: CommitId,
    pub parents: Vec<CommitId>,
    pub author: Identity,
    pub committer: Identity,
    pub author_ts: Timestamp,
    pub committer_ts: Timestamp,
    pub payload_digest: PayloadDigest,
}

impl Commit {
    /// Builds a commit whose hash is computed by [`compute_commit_id`].
    ///
    /// Rejects more than two parents, duplicate parents and a committer
    /// timestamp earlier than the author timestamp.
    pub fn new(
        parents: Vec<CommitId>,
        author: Identity,
        committer: Identity,
        author_ts: Timestamp,
        committer_ts: Timestamp,
        payload_digest: PayloadDigest,
    ) -> Result<Self, ModelError> {
        if parents.len() > 2 {
            return Err(ModelError::PreconditionViolation(format!(
                "a commit has at most 2 parents, got {}",
                parents.len()
            )));
        }
        if parents.len() == 2 && parents[0] == parents[1] {
            return Err(ModelError::PreconditionViolation(
                "duplicate parent".to_string(),
            ));
        }
        if committer_ts < author_ts {
            return Err(ModelError::PreconditionViolation(format!(
                "committer_ts {committer_ts} precedes author_ts {author_ts}"
            )));
        }
        let hash = compute_commit_id(
            &parents,
            &author,
            &committer,
            author_ts,
            committer_ts,
            &payload_digest,
        );
        Ok(Self {
            hash,
            parents,
            author,
            committer,
            author_ts,
            committer_ts,
            payload_digest,
        })
    }

    pub fn first_parent(&self) -> Option<&CommitId> {
        self.parents.first()
    }

    /// Checks the hash against the model's hash function and the structural
    /// invariants. Commits fetched from a hosting service carry Git object ids
    /// and will not pass the hash check.
    pub fn verify(&self) -> Result<(), ModelError> {
        let expected = compute_commit_id(
            &self.parents,
            &self.author,
            &self.committer,
            self.author_ts,
            self.committer_ts,
            &self.payload_digest,
        );
        if expected != self.hash {
            return Err(ModelError::PreconditionViolation(format!(
                "hash {} does not match metadata (expected {expected})",
                self.hash
            )));
        }
        if self.parents.contains(&self.hash) {
            return Err(ModelError::PreconditionViolation(format!(
                "commit {} lists itself as parent",
                self.hash
            )));
        }
        if self.committer_ts < self.author_ts {
            return Err(ModelError::PreconditionViolation(format!(
                "commit {}: committer_ts precedes author_ts",
                self.hash
            )));
        }
        Ok(())
    }
}

const COMMIT_DOMAIN: &[u8] = b"gitwatch-commit-v1\0";

/// Deterministic commit id over every metadata field and the payload digest.
///
/// Encoding: domain tag, parent count (u8), raw parent ids, then author and
/// committer as u32 big-endian length plus UTF-8 bytes, both timestamps as
/// i64 big-endian, and the raw payload digest. The id is the first 20 bytes of
/// the SHA-256 of that encoding.
pub fn compute_commit_id(
    parents: &[CommitId],
    author: &Identity,
    committer: &Identity,
    author_ts: Timestamp,
    committer_ts: Timestamp,
    payload_digest: &PayloadDigest,
) -> CommitId {
    let mut hasher = Sha256::new();
    hasher.update(COMMIT_DOMAIN);
    hasher.update([parents.len() as u8]);
    for parent in parents {
        hasher.update(parent.as_bytes());
    }
    for name in [author.as_str(), committer.as_str()] {
        hasher.update((name.len() as u32).to_be_bytes());
        hasher.update(name.as_bytes());
    }
    hasher.update(author_ts.0.to_be_bytes());
    hasher.update(committer_ts.0.to_be_bytes());
    hasher.update(payload_digest.as_bytes());
    let digest = hasher.finalize();
    let mut id = [0u8; 20];
    id.copy_from_slice(&digest[..20]);
    CommitId::from_bytes(id)
}

/// Derives a payload digest from arbitrary bytes (used by the simulator).
pub fn payload_digest_of(bytes: &[u8]) -> PayloadDigest {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest[..20]);
    PayloadDigest::from_bytes(out)
}

/// A tag `(label, timestamp, target)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagRecord {
    pub label: String,
    pub timestamp: Timestamp,
    pub target: CommitId,
}

impl TagRecord {
    pub fn new(
        label: impl Into<String>,
        timestamp: Timestamp,
        target: CommitId,
    ) -> Result<Self, ModelError> {
        let label = label.into();
        if label.is_empty() {
            return Err(ModelError::EmptyLabel);
        }
        Ok(Self {
            label,
            timestamp,
            target,
        })
    }
}
