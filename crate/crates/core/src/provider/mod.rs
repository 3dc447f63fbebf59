//! Commit metadata by id, dangling commits included, through a cache.
//!
//! A [`Provider`] puts a persistent [`CommitCache`] and a sliding-hour
//! [`RateLimiter`] in front of one [`CommitBackend`]: the hosting service's
//! REST API, a fixture store on disk, or a simulator run held in memory.

mod cache;
mod fixture;
mod limit;
mod remote;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Commit, CommitId, Timestamp};

pub use cache::{CacheEntry, CachedStatus, CommitCache, CACHE_SCHEMA};
pub use fixture::{write_fixture_store, FixtureBackend, FixtureRecord};
pub use limit::{Clock, ManualClock, RateLimiter, SystemClock, WINDOW_SECS};
pub use remote::{
    parse_rest_commit, rest_commit_json, AuthToken, RemoteBackend, DEFAULT_API_BASE, TOKEN_ENV_VARS,
};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("request budget exhausted until {}", reset.to_iso8601())]
    RateLimitExhausted { reset: Timestamp },
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("cache write failed for {id}: {source}")]
    Cache {
        id: CommitId,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("cannot load fixture store {path}: {source}")]
    FixtureStore {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// What a backend said about one id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendReply {
    Found(Commit),
    NotFound,
    /// Worth retrying: network trouble, server errors, garbled bodies.
    Transient(String),
    RateLimited {
        reset: Option<Timestamp>,
    },
    AuthFailure(String),
}

pub trait CommitBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn fetch(&self, repo: &str, id: &CommitId) -> BackendReply;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    #[default]
    Fixture,
    Simulator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub backend: BackendKind,
    /// Fixture store for the `fixture` backend.
    pub fixture_path: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// Backend requests allowed in any sliding hour.
    pub rate_limit: u32,
    pub max_attempts: u32,
    pub backoff_base_secs: f64,
    /// How long a not-found answer stays cached.
    pub not_found_ttl_secs: i64,
    pub api_base: String,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Fixture,
            fixture_path: None,
            cache_dir: None,
            rate_limit: 5000,
            max_attempts: 3,
            backoff_base_secs: 1.0,
            not_found_ttl_secs: 3600,
            api_base: DEFAULT_API_BASE.to_string(),
            timeout_secs: 30,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.rate_limit == 0 {
            return Err(ProviderError::Config("rate_limit must be > 0".into()));
        }
        if self.max_attempts == 0 {
            return Err(ProviderError::Config("max_attempts must be >= 1".into()));
        }
        if !(self.backoff_base_secs >= 0.0 && self.backoff_base_secs.is_finite()) {
            return Err(ProviderError::Config(
                "backoff_base_secs must be a non-negative number".into(),
            ));
        }
        if self.not_found_ttl_secs < 0 {
            return Err(ProviderError::Config(
                "not_found_ttl_secs must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Found,
    NotFound,
    TransientError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchSource {
    Cache,
    Backend,
}

/// `commit` is present exactly when `status` is `Found`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitFetchResult {
    pub status: FetchStatus,
    pub commit: Option<Commit>,
    pub source: FetchSource,
    /// Last backend message for transient errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CommitFetchResult {
    fn found(commit: Commit, source: FetchSource) -> Self {
        Self {
            status: FetchStatus::Found,
            commit: Some(commit),
            source,
            detail: None,
        }
    }

    fn not_found(source: FetchSource) -> Self {
        Self {
            status: FetchStatus::NotFound,
            commit: None,
            source,
            detail: None,
        }
    }
}

pub struct Provider {
    backend: Box<dyn CommitBackend>,
    cache: CommitCache,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    max_attempts: u32,
    backoff_base: Duration,
    not_found_ttl: i64,
    backend_requests: AtomicU64,
}

impl std::fmt::Debug for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Provider")
            .field("backend", &self.backend.name())
            .field("cache", &self.cache.dir())
            .field("rate_limit", &self.limiter.limit())
            .finish_non_exhaustive()
    }
}

impl Provider {
    pub fn new(
        config: &ProviderConfig,
        backend: Box<dyn CommitBackend>,
    ) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(Self {
            backend,
            cache: match &config.cache_dir {
                Some(dir) => CommitCache::on_disk(dir),
                None => CommitCache::in_memory(),
            },
            limiter: RateLimiter::new(config.rate_limit),
            clock: Arc::new(SystemClock),
            max_attempts: config.max_attempts,
            backoff_base: Duration::from_secs_f64(config.backoff_base_secs),
            not_found_ttl: config.not_found_ttl_secs,
            backend_requests: AtomicU64::new(0),
        })
    }

    /// Builds the `remote` or `fixture` backend named in `config`. The
    /// `simulator` backend needs the commits in hand; use
    /// [`FixtureBackend::simulator`] with [`Provider::new`].
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let backend: Box<dyn CommitBackend> = match config.backend {
            BackendKind::Remote => Box::new(RemoteBackend::new(
                config.api_base.clone(),
                AuthToken::from_env(),
                Duration::from_secs(config.timeout_secs),
            )),
            BackendKind::Fixture | BackendKind::Simulator => {
                let path = config.fixture_path.clone().ok_or_else(|| {
                    ProviderError::Config("the fixture backend needs fixture_path".into())
                })?;
                let store = FixtureBackend::load(&path)
                    .map_err(|source| ProviderError::FixtureStore { path, source })?;
                Box::new(store)
            }
        };
        Self::new(config, backend)
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Requests sent to the backend so far, retries included.
    pub fn backend_requests(&self) -> u64 {
        self.backend_requests.load(Ordering::Relaxed)
    }

    pub fn cache(&self) -> &CommitCache {
        &self.cache
    }

    pub fn limiter(&self) -> &RateLimiter {
        &self.limiter
    }

    pub fn get_commit(
        &self,
        repo: &str,
        id: &CommitId,
    ) -> Result<CommitFetchResult, ProviderError> {
        let now = self.clock.now();
        if let Some(entry) = self.cache.load(repo, id) {
            match entry.status {
                CachedStatus::Found => {
                    let commit = entry.commit.expect("consistent cache entry");
                    return Ok(CommitFetchResult::found(commit, FetchSource::Cache));
                }
                CachedStatus::NotFound if now.0 - entry.fetched_at.0 < self.not_found_ttl => {
                    return Ok(CommitFetchResult::not_found(FetchSource::Cache));
                }
                CachedStatus::NotFound => {}
            }
        }

        let mut last_error = String::new();
        for attempt in 0..self.max_attempts {
            let now = self.clock.now();
            self.limiter
                .try_acquire(now)
                .map_err(|reset| ProviderError::RateLimitExhausted { reset })?;
            self.backend_requests.fetch_add(1, Ordering::Relaxed);
            match self.backend.fetch(repo, id) {
                BackendReply::Found(commit) => {
                    let entry = CacheEntry::found(repo, commit.clone(), now, self.backend.name());
                    self.cache
                        .store(entry)
                        .map_err(|source| ProviderError::Cache { id: *id, source })?;
                    return Ok(CommitFetchResult::found(commit, FetchSource::Backend));
                }
                BackendReply::NotFound => {
                    let entry = CacheEntry::not_found(repo, *id, now, self.backend.name());
                    self.cache
                        .store(entry)
                        .map_err(|source| ProviderError::Cache { id: *id, source })?;
                    return Ok(CommitFetchResult::not_found(FetchSource::Backend));
                }
                BackendReply::AuthFailure(msg) => return Err(ProviderError::AuthFailure(msg)),
                BackendReply::RateLimited { reset } => {
                    return Err(ProviderError::RateLimitExhausted {
                        reset: reset.unwrap_or(Timestamp(now.0 + WINDOW_SECS)),
                    })
                }
                BackendReply::Transient(msg) => {
                    log::debug!("{repo} {id}: attempt {} failed: {msg}", attempt + 1);
                    last_error = msg;
                    if attempt + 1 < self.max_attempts && !self.backoff_base.is_zero() {
                        std::thread::sleep(self.backoff_base * 2u32.saturating_pow(attempt));
                    }
                }
            }
        }
        Ok(CommitFetchResult {
            status: FetchStatus::TransientError,
            commit: None,
            source: FetchSource::Backend,
            detail: Some(last_error),
        })
    }

    /// Per-id [`Provider::get_commit`], fetched in parallel. Repeated ids are
    /// fetched once.
    pub fn get_commits_bulk(
        &self,
        repo: &str,
        ids: &[CommitId],
    ) -> BTreeMap<CommitId, Result<CommitFetchResult, ProviderError>> {
        let mut unique = ids.to_vec();
        unique.sort_unstable();
        unique.dedup();
        unique
            .into_par_iter()
            .map(|id| {
                let result = self.get_commit(repo, &id);
                (id, result)
            })
            .collect()
    }
}
