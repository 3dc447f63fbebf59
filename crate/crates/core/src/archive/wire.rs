//! GH-archive line format: one JSON object per line.
//!
//! Only `PushEvent` and tag `CreateEvent` records are decoded. Tag creation
//! records in the public archive do not carry the tagged commit; archives
//! written by this crate add it as `payload.head`, mirroring the field of the
//! same name on push payloads.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EventKind, EventRecord};
use crate::model::{CommitId, Timestamp};

pub(crate) const PUSH_EVENT: &str = "PushEvent";
pub(crate) const CREATE_EVENT: &str = "CreateEvent";

/// Longest commit list the hosting service includes in a push payload.
pub const PUSH_COMMIT_LIMIT: usize = 20;

/// Outcome of decoding a single archive line.
#[derive(Debug)]
pub(crate) enum Decoded {
    Event {
        record: EventRecord,
        truncated: bool,
    },
    OtherKind,
    TagWithoutTarget {
        repo: String,
    },
    Malformed,
}

#[derive(Deserialize)]
struct RawEvent {
    id: Option<Value>,
    #[serde(rename = "type")]
    kind: Option<String>,
    repo: Option<RawRepo>,
    created_at: Option<String>,
    #[serde(default)]
    payload: Value,
}

#[derive(Deserialize)]
struct RawRepo {
    name: Option<String>,
}

pub(crate) fn decode_line(line: &str) -> Decoded {
    let Ok(raw) = serde_json::from_str::<RawEvent>(line) else {
        return Decoded::Malformed;
    };
    let event_id = match raw.id {
        Some(Value::String(s)) if !s.is_empty() => s,
        Some(Value::Number(n)) => n.to_string(),
        _ => return Decoded::Malformed,
    };
    let (Some(kind), Some(repo), Some(created_at)) = (raw.kind, raw.repo, raw.created_at) else {
        return Decoded::Malformed;
    };
    let Some(repo) = repo.name.filter(|n| n.contains('/')) else {
        return Decoded::Malformed;
    };
    let Some(event_ts) = Timestamp::parse_iso8601(&created_at) else {
        return Decoded::Malformed;
    };
    let payload = &raw.payload;

    match kind.as_str() {
        PUSH_EVENT => {
            let mut commit_ids = Vec::new();
            match payload.get("commits") {
                Some(Value::Array(entries)) => {
                    for entry in entries {
                        let Some(sha) = entry.get("sha").and_then(Value::as_str) else {
                            return Decoded::Malformed;
                        };
                        match sha.parse::<CommitId>() {
                            Ok(id) => commit_ids.push(id),
                            Err(_) => return Decoded::Malformed,
                        }
                    }
                }
                Some(Value::Null) | None => {}
                Some(_) => return Decoded::Malformed,
            }
            // Newer payloads may omit the commit list and only name the head.
            if commit_ids.is_empty() {
                match payload.get("head").and_then(Value::as_str).map(str::parse) {
                    Some(Ok(head)) => commit_ids.push(head),
                    _ => return Decoded::Malformed,
                }
            }
            let size = payload
                .get("size")
                .and_then(Value::as_u64)
                .map_or(commit_ids.len(), |s| s as usize);
            let truncated = size > PUSH_COMMIT_LIMIT || size > commit_ids.len();
            Decoded::Event {
                record: EventRecord {
                    event_id,
                    repo_name: repo,
                    kind: EventKind::Push,
                    commit_ids,
                    label: None,
                    event_ts,
                },
                truncated,
            }
        }
        CREATE_EVENT => {
            if payload.get("ref_type").and_then(Value::as_str) != Some("tag") {
                return Decoded::OtherKind;
            }
            let Some(label) = payload
                .get("ref")
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
            else {
                return Decoded::Malformed;
            };
            match payload.get("head").and_then(Value::as_str) {
                Some(head) => match head.parse::<CommitId>() {
                    Ok(target) => Decoded::Event {
                        record: EventRecord {
                            event_id,
                            repo_name: repo,
                            kind: EventKind::TagCreate,
                            commit_ids: vec![target],
                            label: Some(label.to_string()),
                            event_ts,
                        },
                        truncated: false,
                    },
                    Err(_) => Decoded::Malformed,
                },
                None => Decoded::TagWithoutTarget { repo },
            }
        }
        _ => Decoded::OtherKind,
    }
}

#[derive(Serialize)]
struct OutEvent<'a> {
    id: &'a str,
    #[serde(rename = "type")]
    kind: &'static str,
    actor: OutActor<'a>,
    repo: OutRepo<'a>,
    payload: OutPayload<'a>,
    public: bool,
    created_at: String,
}

#[derive(Serialize)]
struct OutActor<'a> {
    login: &'a str,
}

#[derive(Serialize)]
struct OutRepo<'a> {
    name: &'a str,
}

#[derive(Serialize)]
#[serde(untagged)]
enum OutPayload<'a> {
    Push {
        size: usize,
        distinct_size: usize,
        #[serde(rename = "ref")]
        git_ref: &'static str,
        head: String,
        commits: Vec<OutCommit>,
    },
    Tag {
        #[serde(rename = "ref")]
        git_ref: &'a str,
        ref_type: &'static str,
        master_branch: &'static str,
        head: String,
    },
}

#[derive(Serialize)]
struct OutCommit {
    sha: String,
    distinct: bool,
}

pub(crate) fn encode_line(event: &EventRecord) -> String {
    let owner = event.repo_name.split('/').next().unwrap_or_default();
    let (kind, payload) = match event.kind {
        EventKind::Push => (
            PUSH_EVENT,
            OutPayload::Push {
                size: event.commit_ids.len(),
                distinct_size: event.commit_ids.len(),
                git_ref: "refs/heads/master",
                head: event
                    .commit_ids
                    .last()
                    .map(CommitId::to_hex)
                    .unwrap_or_default(),
                commits: event
                    .commit_ids
                    .iter()
                    .map(|id| OutCommit {
                        sha: id.to_hex(),
                        distinct: true,
                    })
                    .collect(),
            },
        ),
        EventKind::TagCreate => (
            CREATE_EVENT,
            OutPayload::Tag {
                git_ref: event.label.as_deref().unwrap_or_default(),
                ref_type: "tag",
                master_branch: "master",
                head: event
                    .commit_ids
                    .first()
                    .map(CommitId::to_hex)
                    .unwrap_or_default(),
            },
        ),
    };
    let out = OutEvent {
        id: &event.event_id,
        kind,
        actor: OutActor { login: owner },
        repo: OutRepo {
            name: &event.repo_name,
        },
        payload,
        public: true,
        created_at: event.event_ts.to_iso8601(),
    };
    serde_json::to_string(&out).expect("event serialization is infallible")
}
