use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

pub const DEFAULT_SKEW_BOUND: i64 = 24 * 3600;

/// Declarative description of an upstream/fork timeline. All instants are
/// integer seconds since the Unix epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScript {
    pub seed: u64,
    #[serde(default = "default_upstream_repo")]
    pub upstream_repo: String,
    #[serde(default = "default_fork_repo")]
    pub fork_repo: String,
    #[serde(default = "default_upstream_identity")]
    pub upstream_identity: String,
    #[serde(default = "default_fork_identity")]
    pub fork_identity: String,
    pub upstream_schedule: Vec<UpstreamStep>,
    /// Index into `upstream_schedule`: the fork starts from that step's last commit.
    pub fork_point: usize,
    #[serde(default)]
    pub fork_schedule: Vec<ForkStep>,
    #[serde(default)]
    pub rebase_schedule: Vec<RebaseStep>,
    #[serde(default)]
    pub tag_schedule: Vec<TagStep>,
    /// Clock offset in seconds per identity, applied to commit timestamps only.
    #[serde(default)]
    pub skew: BTreeMap<String, i64>,
    #[serde(default = "default_skew_bound")]
    pub skew_bound: i64,
    #[serde(default)]
    pub event_loss_rate: f64,
    /// Events withheld from the published archive regardless of the loss rate.
    #[serde(default)]
    pub withheld: Vec<Withheld>,
}

/// `commits` commits pushed upstream; the last one is committed at `at` and,
/// when `patch` is set, is the patch commit carrying that label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpstreamStep {
    pub at: i64,
    pub commits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkStep {
    pub at: i64,
    pub commits: usize,
}

/// Rebase of the fork onto the last commit of upstream step `base`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RebaseStep {
    pub at: i64,
    pub base: usize,
}

/// Tag on the head of `repo` as it stands at `at`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagStep {
    pub at: i64,
    pub label: String,
    #[serde(default)]
    pub repo: TagTarget,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagTarget {
    #[default]
    Fork,
    Upstream,
}

/// Selects the event emitted by one schedule entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Withheld {
    pub schedule: ScheduleKind,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Upstream,
    Fork,
    Rebase,
    Tag,
}

fn default_upstream_repo() -> String {
    "upstream/project".to_string()
}
fn default_fork_repo() -> String {
    "fork/project".to_string()
}
fn default_upstream_identity() -> String {
    "upstream-dev".to_string()
}
fn default_fork_identity() -> String {
    "fork-maintainer".to_string()
}
fn default_skew_bound() -> i64 {
    DEFAULT_SKEW_BOUND
}

impl SimScript {
    /// A script with default names and empty schedules.
    pub fn new(seed: u64, upstream_schedule: Vec<UpstreamStep>, fork_point: usize) -> Self {
        Self {
            seed,
            upstream_repo: default_upstream_repo(),
            fork_repo: default_fork_repo(),
            upstream_identity: default_upstream_identity(),
            fork_identity: default_fork_identity(),
            upstream_schedule,
            fork_point,
            fork_schedule: Vec::new(),
            rebase_schedule: Vec::new(),
            tag_schedule: Vec::new(),
            skew: BTreeMap::new(),
            skew_bound: DEFAULT_SKEW_BOUND,
            event_loss_rate: 0.0,
            withheld: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let script: SimScript =
            toml::from_str(text).map_err(|e| SimError::InvalidScript(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("script serialization is infallible")
    }

    pub fn skew_of(&self, identity: &str) -> i64 {
        self.skew.get(identity).copied().unwrap_or(0)
    }

    /// Instant the fork is created: the fork-point step's push.
    pub fn fork_created_at(&self) -> i64 {
        self.upstream_schedule[self.fork_point].at
    }

    /// Checks every structural clause; the error names the violated one.
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidScript(msg));

        for (what, name) in [
            ("upstream_repo", &self.upstream_repo),
            ("fork_repo", &self.fork_repo),
        ] {
            let mut parts = name.split('/');
            let well_formed = matches!(
                (parts.next(), parts.next(), parts.next()),
                (Some(o), Some(n), None) if !o.is_empty() && !n.is_empty()
            );
            if !well_formed {
                return invalid(format!("{what} `{name}` must look like owner/name"));
            }
        }
        if self.upstream_repo == self.fork_repo {
            return invalid("upstream_repo and fork_repo must differ".into());
        }
        if self.upstream_identity.is_empty() || self.fork_identity.is_empty() {
            return invalid("identities must be non-empty".into());
        }

        if self.upstream_schedule.is_empty() {
            return invalid("upstream_schedule must not be empty".into());
        }
        let mut labels = BTreeSet::new();
        let mut prev: Option<i64> = None;
        for (i, step) in self.upstream_schedule.iter().enumerate() {
            if step.commits == 0 {
                return invalid(format!("upstream_schedule[{i}]: commits must be >= 1"));
            }
            let first = step.at - (step.commits as i64 - 1);
            if prev.is_some_and(|p| first <= p) {
                return invalid(format!(
                    "upstream_schedule[{i}]: schedule must be strictly increasing in time"
                ));
            }
            if let Some(label) = &step.patch {
                if label.is_empty() || !labels.insert(label.clone()) {
                    return invalid(format!(
                        "upstream_schedule[{i}]: patch labels must be unique and non-empty"
                    ));
                }
            }
            prev = Some(step.at);
        }

        if self.fork_point >= self.upstream_schedule.len() {
            return invalid(format!(
                "fork_point {} is outside upstream_schedule",
                self.fork_point
            ));
        }
        let created = self.fork_created_at();

        // Fork pushes and rebases share the fork's timeline.
        let mut fork_timeline: Vec<(i64, i64, String)> = Vec::new();
        let mut prev: Option<i64> = None;
        for (i, step) in self.fork_schedule.iter().enumerate() {
            if step.commits == 0 {
                return invalid(format!("fork_schedule[{i}]: commits must be >= 1"));
            }
            if prev.is_some_and(|p| step.at <= p) {
                return invalid(format!(
                    "fork_schedule[{i}]: schedule must be strictly increasing in time"
                ));
            }
            prev = Some(step.at);
            fork_timeline.push((
                step.at - (step.commits as i64 - 1),
                step.at,
                format!("fork_schedule[{i}]"),
            ));
        }
        let mut prev: Option<(i64, usize)> = None;
        for (i, step) in self.rebase_schedule.iter().enumerate() {
            if let Some((at, base)) = prev {
                if step.at <= at {
                    return invalid(format!(
                        "rebase_schedule[{i}]: schedule must be strictly increasing in time"
                    ));
                }
                if step.base <= base {
                    return invalid(format!(
                        "rebase_schedule[{i}]: rebase bases must advance monotonically"
                    ));
                }
            }
            if step.base >= self.upstream_schedule.len() {
                return invalid(format!(
                    "rebase_schedule[{i}]: base {} is outside upstream_schedule",
                    step.base
                ));
            }
            if step.base <= self.fork_point {
                return invalid(format!(
                    "rebase_schedule[{i}]: base must lie after fork_point"
                ));
            }
            if self.upstream_schedule[step.base].at > step.at {
                return invalid(format!(
                    "rebase_schedule[{i}]: base does not exist yet at the rebase instant"
                ));
            }
            prev = Some((step.at, step.base));
            fork_timeline.push((step.at, step.at, format!("rebase_schedule[{i}]")));
        }
        fork_timeline.sort();
        let mut last = created;
        for (start, end, name) in &fork_timeline {
            if *start <= last {
                return invalid(format!(
                    "{name}: fork activity must strictly follow the previous fork instant \
                     (and the fork's creation)"
                ));
            }
            last = *end;
        }

        let mut prev: Option<i64> = None;
        let mut tag_labels = BTreeSet::new();
        for (i, step) in self.tag_schedule.iter().enumerate() {
            if prev.is_some_and(|p| step.at <= p) {
                return invalid(format!(
                    "tag_schedule[{i}]: schedule must be strictly increasing in time"
                ));
            }
            prev = Some(step.at);
            if step.label.is_empty() || !tag_labels.insert((step.repo as u8, step.label.clone())) {
                return invalid(format!(
                    "tag_schedule[{i}]: labels must be unique per repository and non-empty"
                ));
            }
            let exists_from = match step.repo {
                TagTarget::Fork => created,
                TagTarget::Upstream => self.upstream_schedule[0].at,
            };
            if step.at < exists_from {
                return invalid(format!(
                    "tag_schedule[{i}]: tagged repository does not exist yet"
                ));
            }
        }

        for (who, offset) in &self.skew {
            if *who != self.upstream_identity && *who != self.fork_identity {
                return invalid(format!("skew: unknown identity `{who}`"));
            }
            if offset.abs() > self.skew_bound {
                return invalid(format!(
                    "skew: |{offset}| for `{who}` exceeds the bound of {} s",
                    self.skew_bound
                ));
            }
        }
        let first_upstream = self.upstream_schedule[0].at
            - (self.upstream_schedule[0].commits as i64 - 1)
            + self.skew_of(&self.upstream_identity);
        let first_fork = fork_timeline
            .first()
            .map(|(s, _, _)| *s + self.skew_of(&self.fork_identity));
        if first_upstream < 0 || first_fork.is_some_and(|t| t < 0) {
            return invalid("skewed commit timestamps must be non-negative".into());
        }

        if !(0.0..=1.0).contains(&self.event_loss_rate) {
            return invalid("event_loss_rate must lie in [0, 1]".into());
        }
        for w in &self.withheld {
            let len = match w.schedule {
                ScheduleKind::Upstream => self.upstream_schedule.len(),
                ScheduleKind::Fork => self.fork_schedule.len(),
                ScheduleKind::Rebase => self.rebase_schedule.len(),
                ScheduleKind::Tag => self.tag_schedule.len(),
            };
            if w.index >= len {
                return invalid(format!(
                    "withheld: {:?} index {} is out of range",
                    w.schedule, w.index
                ));
            }
        }
        Ok(())
    }
}
