//! Argument parsing and dispatch.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use graphaudit::audit::AuditState;
use graphaudit::index::Schedule;

use crate::commands::{self, OutputFormat, EXIT_CLEAN};
use crate::config::AuditConfig;
use crate::error::CliError;
use crate::server::{self, Session};

#[derive(Debug, Parser)]
#[command(name = "graphaudit", version, about = "Graph-based static audits of MiniApp programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Path to `audit.toml`.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest priority at or above which a receiver counts as high priority.
    #[arg(long)]
    pub priority_threshold: Option<i64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<AuditConfig, CliError> {
        let mut config = AuditConfig::load(&self.config)?;
        if let Some(t) = self.priority_threshold {
            config.priority_threshold = t;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and index the inputs, writing `graph.json`.
    Ingest(ConfigArgs),
    /// Ingest, run the analyzers and write reports. Exit code 0: no
    /// findings, 1: findings, 2: error.
    Audit {
        #[command(flatten)]
        config: ConfigArgs,
        /// What to print on stdout.
        #[arg(long, default_value = "text")]
        format: String,
        /// Randomize the analyzer schedule with this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a query script over a graph.
    Query {
        /// Exported graph JSON.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        graph: Option<PathBuf>,
        /// Ingest this config instead of reading an exported graph.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Script text, or `@path` to read it from a file.
        #[arg(long)]
        script: String,
        #[arg(long, default_value = "json")]
        format: String,
        /// Write `query.<ext>` into this directory instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the audit API and UI assets.
    Serve {
        #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
        config: Option<PathBuf>,
        /// Exported graph JSON, for sessions without source files.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Audit state to resume.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        priority_threshold: Option<i64>,
        /// Directory of UI assets to serve at `/`.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

/// Runs one command and returns its exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Ingest(args) => {
            let config = args.load()?;
            let path = commands::cmd_ingest(&config, &config.out)?;
            println!("{}", path.display());
            Ok(EXIT_CLEAN)
        }
        Command::Audit { config, format, seed } => {
            let config = config.load()?;
            let format: OutputFormat = format.parse()?;
            let schedule = seed.map_or(Schedule::Canonical, Schedule::Randomized);
            let audit = commands::cmd_audit(&config, &config.out, schedule)?;
            match format {
                OutputFormat::Json => print!("{}", audit.report_json()),
                OutputFormat::Text => print!("{}", audit.report_text()),
                OutputFormat::Dot => return Err(CliError::Usage("audit prints json or text".into())),
            }
            Ok(audit.exit_code())
        }
        Command::Query {
            graph,
            config,
            script,
            format,
            out,
        } => {
            let format: OutputFormat = format.parse()?;
            let script = commands::resolve_script(&script)?;
            let graph = match (graph, config) {
                (Some(path), _) => commands::load_graph(&path)?,
                (None, Some(path)) => {
                    commands::ingest_config(&AuditConfig::load(&path)?, Schedule::Canonical)?.graph
                }
                (None, None) => return Err(CliError::Usage("query needs --graph or --config".into())),
            };
            let sub = commands::query_graph(&graph, &script)?;
            let text = commands::format_subgraph(&sub, format);
            match out {
                Some(dir) => {
                    let ext = match format {
                        OutputFormat::Json => "json",
                        OutputFormat::Dot => "dot",
                        OutputFormat::Text => "txt",
                    };
                    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                    let path = dir.join(format!("query.{ext}"));
                    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
                    println!("{}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(EXIT_CLEAN)
        }
        Command::Serve {
            config,
            graph,
            state,
            port,
            priority_threshold,
            assets,
        } => {
            let session = match (config, graph) {
                (Some(path), _) => {
                    let mut config = AuditConfig::load(&path)?;
                    if let Some(t) = priority_threshold {
                        config.priority_threshold = t;
                    }
                    std::fs::create_dir_all(&config.out).map_err(|e| CliError::io(&config.out, e))?;
                    Session::from_config(&config, state)?
                }
                (None, Some(path)) => {
                    let g = commands::load_graph(&path)?;
                    let loaded = state.as_deref().filter(|p| p.exists()).map(|p| AuditState::load(p, &g)).transpose()?;
                    let app = loaded
                        .as_ref()
                        .map(|s| s.app.clone())
                        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
                        .unwrap_or_else(|| "app".into());
                    Session::from_graph(&app, g, loaded, state)
                }
                (None, None) => return Err(CliError::Usage("serve needs --config or --graph".into())),
            };
            let session = Arc::new(session.with_assets(assets));
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
            runtime.block_on(server::serve(session, port, |addr| {
                println!("listening on http://{addr}");
            }))?;
            Ok(EXIT_CLEAN)
        }
    }
}
