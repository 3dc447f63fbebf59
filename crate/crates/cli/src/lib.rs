//! Command implementations behind the `gitwatch` binary.

pub mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gitwatch_core::archive::{build_event_index, ingest_dir, EventIndex, RepoFilter};
use gitwatch_core::graph::{CommitGraph, CompletionReport, GraphSnapshot};
use gitwatch_core::heuristics::PatchSpec;
use gitwatch_core::model::CommitId;
use gitwatch_core::provider::{CachedStatus, CommitCache, Provider, ProviderConfig};
use gitwatch_core::report::{analyze_graph, ForkAnalysis, Report};
use gitwatch_core::sim::{simulate, write_outputs, SimScript, FIXTURE_STORE_FILE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{AnalysisConfig, OutputFormat, PatchEntry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ALL_FAILED: i32 = 3;

pub const ANALYSIS_CONFIG_FILE: &str = "analysis.toml";

/// Bad input: a missing or invalid script, config or archive.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input(e: impl fmt::Display) -> anyhow::Error {
    InputError(e.to_string()).into()
}

/// Maps an error to the process exit code.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.chain().any(|c| c.is::<InputError>()) {
        EXIT_INPUT
    } else {
        EXIT_RUNTIME
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}

fn load_config(path: &Path) -> Result<AnalysisConfig> {
    AnalysisConfig::load(path).map_err(|e| input(format!("{e:#}")))
}

/// Runs a simulation script and writes the archive, the fixture store, the
/// truth ledger and a ready-to-run analysis config into `out_dir`.
pub fn cmd_simulate(script_path: &Path, out_dir: &Path) -> Result<i32> {
    let script = SimScript::load(script_path).map_err(input)?;
    let out = simulate(&script).map_err(input)?;
    let written = write_outputs(&out, out_dir)?;

    let config = AnalysisConfig {
        upstream: script.upstream_repo.clone(),
        forks: vec![script.fork_repo.clone()],
        archive_dir: Some(PathBuf::from(gitwatch_core::sim::ARCHIVE_SUBDIR)),
        simulator_script: None,
        cache_dir: PathBuf::from("cache"),
        output_dir: PathBuf::from("report"),
        formats: vec![OutputFormat::Table, OutputFormat::Csv, OutputFormat::Json],
        provider: ProviderConfig {
            fixture_path: Some(PathBuf::from(FIXTURE_STORE_FILE)),
            ..ProviderConfig::default()
        },
        patches: out
            .patch_specs()
            .into_iter()
            .map(|p| PatchEntry {
                label: p.label,
                commits: p.upstream_commits,
                published: None,
            })
            .collect(),
    };
    write_atomic(
        &out_dir.join(ANALYSIS_CONFIG_FILE),
        config.to_toml_string().as_bytes(),
    )?;

    println!(
        "simulated {} upstream and {} fork commits, {} dangling",
        out.upstream.len(),
        out.all_commits().count() - out.upstream.len(),
        out.fork.dangling().len()
    );
    println!(
        "wrote {} events in {} archive files ({} withheld), {} truth rows to {}",
        out.events.len(),
        written.archive_files.len(),
        out.withheld.len(),
        out.truth.entries.len(),
        out_dir.display()
    );
    Ok(EXIT_OK)
}

fn ingest_archive(config: &AnalysisConfig) -> Result<EventIndex> {
    let dir = config
        .archive_dir
        .as_ref()
        .ok_or_else(|| input("config has no archive_dir to ingest"))?;
    let filter = RepoFilter::only(
        std::iter::once(config.upstream.clone()).chain(config.forks.iter().cloned()),
    );
    let (events, stats) = ingest_dir(dir, &filter).map_err(input)?;
    let index = build_event_index(events);

    let mut buf = Vec::new();
    index.write_jsonl(&mut buf)?;
    write_atomic(&config.events_path(), &buf)?;
    let stats_json = serde_json::to_string_pretty(&stats)?;
    write_atomic(&config.ingest_stats_path(), stats_json.as_bytes())?;

    println!("{}", stats.summary());
    println!(
        "indexed {} events ({} repeated ids dropped) into {}",
        index.len(),
        index.duplicates_dropped(),
        config.events_path().display()
    );
    Ok(index)
}

/// Parses the archive and persists the event index under the cache dir.
pub fn cmd_ingest(config_path: &Path) -> Result<i32> {
    let config = load_config(config_path)?;
    ingest_archive(&config)?;
    Ok(EXIT_OK)
}

fn load_or_ingest(config: &AnalysisConfig) -> Result<EventIndex> {
    let path = config.events_path();
    if path.exists() {
        let file =
            fs::File::open(&path).with_context(|| format!("cannot read {}", path.display()))?;
        return EventIndex::read_jsonl(BufReader::new(file)).with_context(|| {
            format!("{} is damaged; run `gitwatch ingest` again", path.display())
        });
    }
    log::info!("no event index at {}; ingesting", path.display());
    ingest_archive(config)
}

/// Command-line overrides for `analyze`.
#[derive(Clone, Debug, Default)]
pub struct AnalyzeOverrides {
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
    pub backend: Option<gitwatch_core::provider::BackendKind>,
}

#[derive(Serialize, Deserialize)]
struct StoredGraph {
    completion: CompletionReport,
    graph: GraphSnapshot,
}

/// Identifies a graph by the events it was built from.
fn graph_fingerprint(index: &EventIndex, upstream: &str, fork: &str) -> String {
    let mut h = Sha256::new();
    for repo in [upstream, fork] {
        h.update(repo.as_bytes());
        h.update([0]);
        for e in index.events_for_repo(repo) {
            h.update(serde_json::to_vec(e).expect("event serializes"));
            h.update(b"\n");
        }
    }
    hex::encode(&h.finalize()[..8])
}

fn graph_path(config: &AnalysisConfig, index: &EventIndex, fork: &str) -> PathBuf {
    let fp = graph_fingerprint(index, &config.upstream, fork);
    config
        .graphs_dir()
        .join(format!("{}-{fp}.json", fork.replace('/', "__")))
}

fn cached_graph(path: &Path) -> Option<(CommitGraph, CompletionReport)> {
    let text = fs::read_to_string(path).ok()?;
    let stored: StoredGraph = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("ignoring unreadable graph snapshot {}: {e}", path.display());
            return None;
        }
    };
    match CommitGraph::from_snapshot(stored.graph) {
        Ok(g) => Some((g, stored.completion)),
        Err(e) => {
            log::warn!("ignoring graph snapshot {}: {e}", path.display());
            None
        }
    }
}

fn analyze_one(
    config: &AnalysisConfig,
    index: &EventIndex,
    provider: &Provider,
    fork: &str,
    patches: &[PatchSpec],
) -> ForkAnalysis {
    let path = graph_path(config, index, fork);
    let built = match cached_graph(&path) {
        Some(hit) => {
            log::info!("{fork}: graph from {}", path.display());
            Ok(hit)
        }
        None => gitwatch_core::graph::build_graph(index, &config.upstream, fork, provider).map(
            |(graph, completion)| {
                if completion.is_complete()
                    && completion.transient.is_empty()
                    && completion.errors.is_empty()
                {
                    let stored = StoredGraph {
                        completion: completion.clone(),
                        graph: graph.to_snapshot(),
                    };
                    let text = serde_json::to_vec(&stored).expect("graph serializes");
                    if let Err(e) = write_atomic(&path, &text) {
                        log::warn!("{fork}: cannot store graph snapshot: {e:#}");
                    }
                }
                (graph, completion)
            },
        ),
    };
    match built {
        Ok((graph, completion)) => {
            if !completion.is_complete() {
                eprintln!(
                    "warning: {fork}: graph incomplete ({})",
                    completion.summary()
                );
            }
            ForkAnalysis {
                fork: fork.to_string(),
                error: None,
                estimates: analyze_graph(&graph, index, patches),
                completion,
            }
        }
        Err(e) => {
            eprintln!("warning: {fork}: {e}");
            ForkAnalysis::failed(fork, &e, patches)
        }
    }
}

/// Builds each fork's graph and writes the requested report formats.
pub fn cmd_analyze(config_path: &Path, overrides: &AnalyzeOverrides) -> Result<i32> {
    let mut config = load_config(config_path)?;
    if let Some(dir) = &overrides.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(dir) = &overrides.cache_dir {
        config.cache_dir = dir.clone();
        config.provider.cache_dir = Some(config.commit_cache_dir());
    }
    if !overrides.formats.is_empty() {
        config.formats = overrides.formats.clone();
    }
    if let Some(kind) = overrides.backend {
        config.provider.backend = kind;
    }

    let (index, provider, patches) = match &config.simulator_script {
        Some(script_path) => {
            let script = SimScript::load(script_path).map_err(input)?;
            let out = simulate(&script).map_err(input)?;
            let patches = if config.patches.is_empty() {
                out.patch_specs()
            } else {
                config.patch_specs().map_err(input)?
            };
            let provider =
                Provider::new(&config.provider, Box::new(out.backend())).map_err(input)?;
            (build_event_index(out.events), provider, patches)
        }
        None => {
            let patches = config.patch_specs().map_err(input)?;
            let provider = Provider::from_config(&config.provider).map_err(input)?;
            (load_or_ingest(&config)?, provider, patches)
        }
    };
    log::info!(
        "{} events indexed; backend {}",
        index.len(),
        provider.backend_name()
    );

    let forks: Vec<ForkAnalysis> = config
        .forks
        .iter()
        .map(|fork| analyze_one(&config, &index, &provider, fork, &patches))
        .collect();
    let report = Report::new(config.upstream.clone(), patches, forks);
    write_report(&report, &config.output_dir, &config.formats)?;
    print!("{}", report.summary_table());

    if report.all_failed() {
        eprintln!("error: no estimate could be produced");
        return Ok(EXIT_ALL_FAILED);
    }
    Ok(EXIT_OK)
}

/// Writes each format's files into `dir`.
pub fn write_report(report: &Report, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(&str, String)> = Vec::new();
    for f in formats {
        match f {
            OutputFormat::Table => {
                files.push(("summary.txt", report.summary_table()));
                files.push(("details.txt", report.detail_table()));
            }
            OutputFormat::Csv => {
                files.push(("estimates.csv", report.to_csv()));
                files.push(("plot_data.csv", report.plot_csv()));
            }
            OutputFormat::Json => files.push(("estimates.json", report.to_json())),
        }
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Summarizes the cache dir, or prints the entries for one commit id.
pub fn cmd_cache_inspect(cache_dir: &Path, id: Option<&str>) -> Result<i32> {
    let commits = CommitCache::on_disk(cache_dir.join("commits"));
    let entries = commits
        .scan()
        .with_context(|| format!("cannot scan {}", cache_dir.display()))?;
    let mut out = std::io::stdout().lock();

    if let Some(id) = id {
        let id: CommitId = id.parse().map_err(input)?;
        let hits: Vec<_> = entries.iter().filter(|e| e.id == id).collect();
        if hits.is_empty() {
            writeln!(out, "{id}: not cached")?;
            return Ok(EXIT_RUNTIME);
        }
        for e in hits {
            writeln!(out, "{}", serde_json::to_string_pretty(e)?)?;
        }
        return Ok(EXIT_OK);
    }

    writeln!(out, "cache: {}", cache_dir.display())?;
    let events = cache_dir.join("events.jsonl");
    if events.exists() {
        let file = fs::File::open(&events)?;
        match EventIndex::read_jsonl(BufReader::new(file)) {
            Ok(index) => writeln!(out, "event index: {} events", index.len())?,
            Err(e) => writeln!(out, "event index: damaged ({e})")?,
        }
    } else {
        writeln!(out, "event index: none")?;
    }

    let mut per_repo: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for e in &entries {
        let slot = per_repo.entry(&e.repo).or_default();
        match e.status {
            CachedStatus::Found => slot.0 += 1,
            CachedStatus::NotFound => slot.1 += 1,
        }
    }
    writeln!(out, "commit cache: {} entries", entries.len())?;
    for (repo, (found, missing)) in &per_repo {
        writeln!(out, "  {repo}: found={found} not_found={missing}")?;
    }

    let mut graphs: Vec<String> = match fs::read_dir(cache_dir.join("graphs")) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    graphs.sort();
    writeln!(out, "graph snapshots: {}", graphs.len())?;
    for g in graphs {
        writeln!(out, "  {g}")?;
    }
    Ok(EXIT_OK)
}

/// The cache dir named by a config file.
pub fn cache_dir_of(config_path: &Path) -> Result<PathBuf> {
    Ok(load_config(config_path)?.cache_dir)
}
