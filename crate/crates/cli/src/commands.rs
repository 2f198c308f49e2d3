//! The batch commands: ingest, audit and query.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use graphaudit::analyze::Registry;
use graphaudit::audit::{ingest, render_text, schedule_and_run, AuditReport, AuditState, Ingested, RunOutcome};
use graphaudit::frontend::{export_dot, export_graph_json, export_subgraph_json, import_graph_json};
use graphaudit::index::Schedule;
use graphaudit::query::{eval_query, parse_query};
use graphaudit::{ProgramGraph, Subgraph};

use crate::config::AuditConfig;
use crate::error::CliError;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

pub const GRAPH_FILE: &str = "graph.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Dot,
    Text,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "dot" => Ok(OutputFormat::Dot),
            "text" => Ok(OutputFormat::Text),
            other => Err(CliError::Usage(format!("unknown format `{other}`; expected json, dot or text"))),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ingest_config(config: &AuditConfig, schedule: Schedule) -> Result<Ingested, CliError> {
    let ingested = ingest(&config.inputs()?, schedule)?;
    for w in &ingested.warnings {
        log::warn!("{w}");
    }
    Ok(ingested)
}

/// Builds the graph and writes `graph.json` under `out`.
pub fn cmd_ingest(config: &AuditConfig, out: &Path) -> Result<PathBuf, CliError> {
    let ingested = ingest_config(config, Schedule::Canonical)?;
    let path = out.join(GRAPH_FILE);
    write(&path, &export_graph_json(&ingested.graph))?;
    Ok(path)
}

/// Everything one audit produces.
#[derive(Debug, Clone)]
pub struct AuditRun {
    pub ingested: Ingested,
    pub run: RunOutcome,
    pub state: AuditState,
    pub report: AuditReport,
}

impl AuditRun {
    pub fn exit_code(&self) -> i32 {
        if self.report.has_failures() {
            EXIT_ERROR
        } else if self.report.has_findings() {
            EXIT_FINDINGS
        } else {
            EXIT_CLEAN
        }
    }

    pub fn report_json(&self) -> String {
        self.report.to_json()
    }

    pub fn report_text(&self) -> String {
        render_text(&self.report)
    }
}

/// Ingests and analyzes without touching the file system beyond inputs.
pub fn run_audit(config: &AuditConfig, schedule: Schedule) -> Result<AuditRun, CliError> {
    let ingested = ingest_config(config, schedule)?;
    let registry = Registry::builtin();
    let run = schedule_and_run(&registry, &config.analyzers, &ingested.context, schedule)?;
    let state = AuditState::from_run(&config.app, &ingested.graph, &run);
    let report = AuditReport::new(&registry, &state, &run, &ingested.warnings);
    Ok(AuditRun {
        ingested,
        run,
        state,
        report,
    })
}

/// Runs the audit and writes graph, reports and state under `out`.
/// The report files depend only on the inputs; the state also records
/// run timings.
pub fn cmd_audit(config: &AuditConfig, out: &Path, schedule: Schedule) -> Result<AuditRun, CliError> {
    let audit = run_audit(config, schedule)?;
    write(&out.join(GRAPH_FILE), &export_graph_json(&audit.ingested.graph))?;
    write(&out.join(REPORT_JSON), &audit.report_json())?;
    write(&out.join(REPORT_TEXT), &audit.report_text())?;
    write(&out.join(STATE_FILE), &audit.state.to_json())?;
    Ok(audit)
}

/// `text` verbatim, or the contents of the file named after a leading `@`.
pub fn resolve_script(arg: &str) -> Result<String, CliError> {
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::io(Path::new(path), e)),
        None => Ok(arg.to_owned()),
    }
}

pub fn load_graph(path: &Path) -> Result<Arc<ProgramGraph>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(Arc::new(import_graph_json(&text)?))
}

pub fn query_graph(graph: &Arc<ProgramGraph>, script: &str) -> Result<Subgraph, CliError> {
    Ok(eval_query(&parse_query(script)?, graph))
}

pub fn format_subgraph(sub: &Subgraph, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => export_subgraph_json(sub),
        OutputFormat::Dot => export_dot(sub),
        OutputFormat::Text => subgraph_text(sub),
    }
}

fn subgraph_text(sub: &Subgraph) -> String {
    let g = sub.graph();
    let mut out = String::new();
    let _ = writeln!(out, "{} nodes, {} edges", sub.nodes().len(), sub.edges().len());
    for id in sub.nodes() {
        let Some(n) = g.node(*id) else { continue };
        let tags: Vec<&str> = n.tags.iter().map(String::as_str).collect();
        let at = n
            .span
            .as_ref()
            .map(|s| format!("  {} bytes {}..{}", s.path, s.start, s.end))
            .unwrap_or_default();
        let _ = writeln!(out, "{id}  {}  [{}]{at}", n.name(), tags.join(","));
    }
    for id in sub.edges() {
        let Some(e) = g.edge(*id) else { continue };
        let tags: Vec<&str> = e.tags.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{id}  {} -> {}  [{}]", e.from, e.to, tags.join(","));
    }
    out
}

/// Evaluates `script` over the graph in `graph_path`.
pub fn cmd_query(graph_path: &Path, script: &str, format: OutputFormat) -> Result<String, CliError> {
    let graph = load_graph(graph_path)?;
    Ok(format_subgraph(&query_graph(&graph, script)?, format))
}
