use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gitwatch_core::heuristics::PatchSpec;
use gitwatch_core::model::{CommitId, Timestamp};
use gitwatch_core::provider::ProviderConfig;
use serde::{Deserialize, Serialize};

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

/// One `[[patches]]` entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchEntry {
    pub label: String,
    pub commits: Vec<CommitId>,
    /// `YYYY-MM-DD` or a full RFC 3339 timestamp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<String>,
}

impl PatchEntry {
    pub fn to_spec(&self) -> Result<PatchSpec> {
        if self.commits.is_empty() {
            bail!("patch `{}` lists no commits", self.label);
        }
        let published_date = match &self.published {
            None => None,
            Some(s) => Some(
                Timestamp::parse_date(s)
                    .or_else(|| Timestamp::parse_iso8601(s))
                    .with_context(|| format!("patch `{}`: bad published date `{s}`", self.label))?,
            ),
        };
        Ok(PatchSpec {
            label: self.label.clone(),
            upstream_commits: self.commits.clone(),
            published_date,
        })
    }
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from(".gitwatch-cache")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("report")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Table, OutputFormat::Csv, OutputFormat::Json]
}

/// The analysis configuration file. Relative paths are taken from the
/// directory holding the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub upstream: String,
    pub forks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archive_dir: Option<PathBuf>,
    /// Run this simulation script in-process instead of reading an archive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulator_script: Option<PathBuf>,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub patches: Vec<PatchEntry>,
}

fn valid_repo_name(name: &str) -> bool {
    let mut parts = name.split('/');
    let ok = |p: Option<&str>| {
        p.is_some_and(|p| {
            !p.is_empty()
                && p.chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        })
    };
    ok(parts.next()) && ok(parts.next()) && parts.next().is_none()
}

impl AnalysisConfig {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: AnalysisConfig = toml::from_str(text).context("invalid config")?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            self.archive_dir.as_mut(),
            self.simulator_script.as_mut(),
            self.provider.fixture_path.as_mut(),
            self.provider.cache_dir.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
        join(&mut self.cache_dir);
        join(&mut self.output_dir);
        if self.provider.cache_dir.is_none() {
            self.provider.cache_dir = Some(self.commit_cache_dir());
        }
    }

    pub fn validate(&self) -> Result<()> {
        for repo in std::iter::once(&self.upstream).chain(&self.forks) {
            if !valid_repo_name(repo) {
                bail!("`{repo}` is not an owner/name repository");
            }
        }
        if self.forks.is_empty() {
            bail!("no forks listed");
        }
        if self.forks.contains(&self.upstream) {
            bail!("`{}` is both upstream and a fork", self.upstream);
        }
        match (&self.archive_dir, &self.simulator_script) {
            (Some(_), Some(_)) => bail!("set archive_dir or simulator_script, not both"),
            (None, None) => bail!("set archive_dir or simulator_script"),
            _ => {}
        }
        if self.simulator_script.is_none() && self.patches.is_empty() {
            bail!("no [[patches]] listed");
        }
        if self.formats.is_empty() {
            bail!("formats is empty");
        }
        for p in &self.patches {
            p.to_spec()?;
        }
        self.provider.validate()?;
        Ok(())
    }

    pub fn patch_specs(&self) -> Result<Vec<PatchSpec>> {
        self.patches.iter().map(PatchEntry::to_spec).collect()
    }

    pub fn commit_cache_dir(&self) -> PathBuf {
        self.cache_dir.join("commits")
    }

    pub fn events_path(&self) -> PathBuf {
        self.cache_dir.join("events.jsonl")
    }

    pub fn ingest_stats_path(&self) -> PathBuf {
        self.cache_dir.join("ingest-stats.json")
    }

    pub fn graphs_dir(&self) -> PathBuf {
        self.cache_dir.join("graphs")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
upstream = "bitcoin/bitcoin"
forks = ["litecoin-project/litecoin"]
archive_dir = "archive"

[[patches]]
label = "BIP65"
commits = ["0123456789abcdef0123456789abcdef01234567"]
published = "2015-10-08"
"#;

    #[test]
    fn relative_paths_resolve_from_config_dir() {
        let cfg = AnalysisConfig::from_toml_str(MINIMAL, Path::new("/tmp/x")).unwrap();
        assert_eq!(
            cfg.archive_dir.as_deref(),
            Some(Path::new("/tmp/x/archive"))
        );
        assert_eq!(cfg.cache_dir, Path::new("/tmp/x/.gitwatch-cache"));
        assert_eq!(
            cfg.provider.cache_dir.as_deref(),
            Some(Path::new("/tmp/x/.gitwatch-cache/commits"))
        );
        assert_eq!(cfg.formats.len(), 3);
        let specs = cfg.patch_specs().unwrap();
        assert_eq!(specs[0].published_date.unwrap().to_date(), "2015-10-08");
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new("/");
        let cases = [
            MINIMAL.replace("litecoin-project/litecoin", "bitcoin/bitcoin"),
            MINIMAL.replace("forks = [\"litecoin-project/litecoin\"]", "forks = []"),
            MINIMAL.replace("archive_dir = \"archive\"", ""),
            MINIMAL.replace("2015-10-08", "yesterday"),
            MINIMAL.replace("bitcoin/bitcoin", "bitcoin"),
            format!("{MINIMAL}\nsurprise = 1\n"),
        ];
        for text in cases {
            assert!(
                AnalysisConfig::from_toml_str(&text, base).is_err(),
                "{text}"
            );
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = AnalysisConfig::from_toml_str(MINIMAL, Path::new("/a")).unwrap();
        let again = AnalysisConfig::from_toml_str(&cfg.to_toml_string(), Path::new("/b")).unwrap();
        assert_eq!(cfg, again);
    }
}
