use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use gitwatch::{
    cache_dir_of, cmd_analyze, cmd_cache_inspect, cmd_ingest, cmd_simulate, exit_code_for,
    AnalyzeOverrides, OutputFormat,
};
use gitwatch_core::provider::BackendKind;

#[derive(Parser)]
#[command(
    name = "gitwatch",
    version,
    about = "Track how long forks take to pick up upstream patches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Backend {
    Remote,
    Fixture,
    Simulator,
}

impl From<Backend> for BackendKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Remote => BackendKind::Remote,
            Backend::Fixture => BackendKind::Fixture,
            Backend::Simulator => BackendKind::Simulator,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation script and write its archive, commits and truth ledger
    Simulate {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse the event archive into the cached event index
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build commit graphs and estimate propagation delays
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// May be repeated; replaces the config's list
        #[arg(long = "format", value_enum)]
        formats: Vec<OutputFormat>,
        #[arg(long, value_enum)]
        backend: Option<Backend>,
    },
    /// Summarize the cache, or show what is cached for one commit
    CacheInspect {
        #[arg(
            long,
            conflicts_with = "cache_dir",
            required_unless_present = "cache_dir"
        )]
        config: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { script, out } => cmd_simulate(&script, &out),
        Command::Ingest { config } => cmd_ingest(&config),
        Command::Analyze {
            config,
            output_dir,
            cache_dir,
            formats,
            backend,
        } => cmd_analyze(
            &config,
            &AnalyzeOverrides {
                output_dir,
                cache_dir,
                formats,
                backend: backend.map(Into::into),
            },
        ),
        Command::CacheInspect {
            config,
            cache_dir,
            id,
        } => {
            let dir = match (cache_dir, config) {
                (Some(dir), _) => dir,
                (None, Some(config)) => cache_dir_of(&config)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            cmd_cache_inspect(&dir, id.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
