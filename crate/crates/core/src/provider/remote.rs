use std::fmt;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{BackendReply, CommitBackend};
use crate::model::{Commit, CommitId, Identity, PayloadDigest, Timestamp};

pub const DEFAULT_API_BASE: &str = "https://api.github.com";
pub const TOKEN_ENV_VARS: [&str; 2] = ["GITWATCH_TOKEN", "GITHUB_TOKEN"];

/// API token. Never printed, serialized or logged.
#[derive(Clone)]
pub struct AuthToken(String);

impl AuthToken {
    pub fn new(token: impl Into<String>) -> Option<Self> {
        let token = token.into();
        (!token.trim().is_empty()).then_some(Self(token.trim().to_string()))
    }

    /// First non-empty variable of [`TOKEN_ENV_VARS`].
    pub fn from_env() -> Option<Self> {
        TOKEN_ENV_VARS
            .iter()
            .find_map(|var| std::env::var(var).ok().and_then(Self::new))
    }
}

impl fmt::Debug for AuthToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AuthToken(<redacted>)")
    }
}

/// Commit metadata over the hosting service's REST commit endpoint.
pub struct RemoteBackend {
    agent: ureq::Agent,
    api_base: String,
    token: Option<AuthToken>,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("api_base", &self.api_base)
            .field("token", &self.token)
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(api_base: impl Into<String>, token: Option<AuthToken>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent("gitwatch")
            .build()
            .into();
        Self {
            agent,
            api_base: api_base.into().trim_end_matches('/').to_string(),
            token,
        }
    }

    fn url(&self, repo: &str, id: &CommitId) -> String {
        format!("{}/repos/{repo}/commits/{id}", self.api_base)
    }
}

impl CommitBackend for RemoteBackend {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn fetch(&self, repo: &str, id: &CommitId) -> BackendReply {
        let mut request = self
            .agent
            .get(&self.url(repo, id))
            .header("Accept", "application/vnd.github+json");
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {}", token.0));
        }
        let mut response = match request.call() {
            Ok(r) => r,
            Err(e) => return BackendReply::Transient(e.to_string()),
        };
        let status = response.status().as_u16();
        let header = |name: &str| {
            response
                .headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        let remaining = header("x-ratelimit-remaining");
        let reset = header("x-ratelimit-reset").and_then(|v| v.parse::<i64>().ok());
        match status {
            200 => match response.body_mut().read_to_string() {
                Ok(body) => match parse_rest_commit(&body) {
                    Some(commit) if commit.hash == *id => BackendReply::Found(commit),
                    Some(commit) => BackendReply::Transient(format!(
                        "asked for {id}, service answered {}",
                        commit.hash
                    )),
                    None => BackendReply::Transient("unparseable commit response".into()),
                },
                Err(e) => BackendReply::Transient(e.to_string()),
            },
            401 => BackendReply::AuthFailure("credentials rejected (401)".into()),
            403 | 429 if remaining.as_deref() == Some("0") || status == 429 => {
                BackendReply::RateLimited {
                    reset: reset.map(Timestamp),
                }
            }
            403 => BackendReply::AuthFailure("access forbidden (403)".into()),
            404 | 422 => BackendReply::NotFound,
            _ => BackendReply::Transient(format!("HTTP {status}")),
        }
    }
}

#[derive(Deserialize)]
struct RestCommit {
    sha: String,
    #[serde(default)]
    parents: Vec<RestRef>,
    commit: RestInner,
}

#[derive(Deserialize)]
struct RestRef {
    sha: String,
}

#[derive(Deserialize)]
struct RestInner {
    author: RestSignature,
    committer: RestSignature,
    tree: RestRef,
}

#[derive(Deserialize)]
struct RestSignature {
    #[serde(default)]
    name: String,
    #[serde(default)]
    email: String,
    date: String,
}

impl RestSignature {
    fn identity(&self) -> Option<Identity> {
        let name = if self.name.is_empty() {
            &self.email
        } else {
            &self.name
        };
        Identity::new(name.clone()).ok()
    }
}

/// Reads the fields of [`Commit`] out of a REST commit response. The tree id
/// stands in for the payload digest.
pub fn parse_rest_commit(body: &str) -> Option<Commit> {
    let raw: RestCommit = serde_json::from_str(body).ok()?;
    let parents = raw
        .parents
        .iter()
        .map(|p| p.sha.parse::<CommitId>().ok())
        .collect::<Option<Vec<_>>>()?;
    Some(Commit {
        hash: raw.sha.parse().ok()?,
        parents,
        author: raw.commit.author.identity()?,
        committer: raw.commit.committer.identity()?,
        author_ts: Timestamp::parse_iso8601(&raw.commit.author.date)?,
        committer_ts: Timestamp::parse_iso8601(&raw.commit.committer.date)?,
        payload_digest: raw.commit.tree.sha.parse::<PayloadDigest>().ok()?,
    })
}

/// The response body the REST endpoint returns for `commit`, limited to the
/// fields [`parse_rest_commit`] reads.
pub fn rest_commit_json(commit: &Commit) -> Value {
    json!({
        "sha": commit.hash.to_hex(),
        "commit": {
            "author": {"name": commit.author.as_str(), "email": "", "date": commit.author_ts.to_iso8601()},
            "committer": {"name": commit.committer.as_str(), "email": "", "date": commit.committer_ts.to_iso8601()},
            "tree": {"sha": commit.payload_digest.to_hex()},
            "message": "",
        },
        "parents": commit.parents.iter().map(|p| json!({"sha": p.to_hex()})).collect::<Vec<_>>(),
    })
}
