use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::model::{Commit, CommitId, Timestamp};

pub const CACHE_SCHEMA: &str = "gitwatch-cache/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachedStatus {
    Found,
    NotFound,
}

/// One cache file: the commit (or its absence) plus where and when it was
/// fetched.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub schema: String,
    pub repo: String,
    pub id: CommitId,
    pub status: CachedStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commit: Option<Commit>,
    pub fetched_at: Timestamp,
    pub backend: String,
}

impl CacheEntry {
    pub fn found(repo: &str, commit: Commit, fetched_at: Timestamp, backend: &str) -> Self {
        Self {
            schema: CACHE_SCHEMA.to_string(),
            repo: repo.to_string(),
            id: commit.hash,
            status: CachedStatus::Found,
            commit: Some(commit),
            fetched_at,
            backend: backend.to_string(),
        }
    }

    pub fn not_found(repo: &str, id: CommitId, fetched_at: Timestamp, backend: &str) -> Self {
        Self {
            schema: CACHE_SCHEMA.to_string(),
            repo: repo.to_string(),
            id,
            status: CachedStatus::NotFound,
            commit: None,
            fetched_at,
            backend: backend.to_string(),
        }
    }

    fn is_consistent(&self) -> bool {
        self.schema == CACHE_SCHEMA
            && match (&self.status, &self.commit) {
                (CachedStatus::Found, Some(c)) => c.hash == self.id,
                (CachedStatus::NotFound, None) => true,
                _ => false,
            }
    }
}

/// On-disk cache with an in-memory layer in front of it.
///
/// Files live at `<dir>/<owner>/<name>/<first two hex>/<id>`. Writes go to a
/// temporary file that is renamed into place, so readers never observe a
/// partial record.
#[derive(Debug, Default)]
pub struct CommitCache {
    dir: Option<PathBuf>,
    memo: RwLock<HashMap<(String, CommitId), CacheEntry>>,
    tmp_counter: AtomicU64,
}

impl CommitCache {
    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path_for(dir: &Path, repo: &str, id: &CommitId) -> PathBuf {
        let mut path = dir.to_path_buf();
        for part in repo.split('/') {
            path.push(part);
        }
        path.push(id.prefix());
        path.push(id.to_hex());
        path
    }

    /// Memory first, then disk. Unreadable or inconsistent files count as
    /// misses and are overwritten by the next store.
    pub fn load(&self, repo: &str, id: &CommitId) -> Option<CacheEntry> {
        let key = (repo.to_string(), *id);
        if let Some(entry) = self.memo.read().get(&key) {
            return Some(entry.clone());
        }
        let path = Self::path_for(self.dir.as_deref()?, repo, id);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("ignoring unreadable cache file {}: {e}", path.display());
                return None;
            }
        };
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(entry) if entry.is_consistent() && entry.id == *id => {
                self.memo.write().insert(key, entry.clone());
                Some(entry)
            }
            _ => {
                log::warn!("ignoring corrupt cache file {}", path.display());
                None
            }
        }
    }

    pub fn store(&self, entry: CacheEntry) -> io::Result<()> {
        if let Some(dir) = &self.dir {
            let path = Self::path_for(dir, &entry.repo, &entry.id);
            let parent = path.parent().expect("cache path has a parent");
            fs::create_dir_all(parent)?;
            let tmp = parent.join(format!(
                ".{}.{}.{}.tmp",
                entry.id,
                std::process::id(),
                self.tmp_counter.fetch_add(1, Ordering::Relaxed)
            ));
            let mut text = serde_json::to_string_pretty(&entry).map_err(io::Error::other)?;
            text.push('\n');
            fs::write(&tmp, text)?;
            fs::rename(&tmp, &path)?;
        }
        self.memo
            .write()
            .insert((entry.repo.clone(), entry.id), entry);
        Ok(())
    }

    /// Every entry stored on disk, for inspection tools.
    pub fn scan(&self) -> io::Result<Vec<CacheEntry>> {
        let Some(dir) = &self.dir else {
            return Ok(self.memo.read().values().cloned().collect());
        };
        let mut out = Vec::new();
        if !dir.exists() {
            return Ok(out);
        }
        let mut stack = vec![dir.clone()];
        while let Some(d) = stack.pop() {
            for item in fs::read_dir(&d)? {
                let item = item?;
                let path = item.path();
                if item.file_type()?.is_dir() {
                    stack.push(path);
                } else if path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.parse::<CommitId>().is_ok())
                {
                    let text = fs::read_to_string(&path)?;
                    if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
                        out.push(entry);
                    }
                }
            }
        }
        out.sort_by(|a, b| (&a.repo, a.id).cmp(&(&b.repo, b.id)));
        Ok(out)
    }
}
