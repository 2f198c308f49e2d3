//! Audit service: ingestion, analyzer scheduling, the work-item queue,
//! smart views and persisted audit state.

mod report;
mod scheduler;
mod smartview;
mod state;
#[cfg(test)]
mod tests;

use std::sync::Arc;

use thiserror::Error;

use crate::analyze::{AnalysisContext, AnalyzerError};
use crate::frontend::{
    parse_layout, parse_manifest, parse_miniapp, parse_permission_map, FrontendError, ManifestModel, PermissionMap,
    PlatformProfile, SourceUnit, Warning,
};
use crate::graph::ProgramGraph;
use crate::index::{IndexError, IndexInputs, IndexPipeline, IndexReport, Schedule, BUILTIN_INDEXERS};

pub use report::{render_text, AnalyzerOutcome, AuditReport, ReportItem};
pub use scheduler::{schedule_and_run, RunOutcome, RunRecord, RunStatus};
pub use smartview::{smart_view, SmartViewKind, SmartViewRequest, Steps};
pub use state::{graph_hash, AuditState, JournalEntry, WorkItem, WorkItemFilter, WorkItemPatch};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
    #[error("analyzer dependency cycle: {}", .0.join(" -> "))]
    DependencyCycle(Vec<String>),
    #[error("unknown work item `{0}`")]
    UnknownWorkItem(String),
    #[error("unknown artifact id `{0}`")]
    UnknownArtifact(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("smart view selection is empty")]
    EmptySelection,
    #[error("invalid step count `{0}`: expected a positive integer or `fixpoint`")]
    InvalidSteps(String),
    #[error("audit state belongs to graph {expected}, but the loaded graph hashes to {found}")]
    HashMismatch { expected: String, found: String },
    #[error("audit state schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// A named input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFile {
    pub path: String,
    pub text: String,
}

impl InputFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        InputFile {
            path: path.into(),
            text: text.into(),
        }
    }
}

/// Everything needed to build and index one app's graph.
#[derive(Debug, Clone)]
pub struct AuditInputs {
    pub app: String,
    pub profile: PlatformProfile,
    pub sources: Vec<SourceUnit>,
    pub manifest: Option<InputFile>,
    pub layouts: Vec<InputFile>,
    pub permission_map: Option<InputFile>,
    pub indexers: Vec<String>,
    pub priority_threshold: i64,
}

impl AuditInputs {
    pub fn new(app: impl Into<String>, profile: PlatformProfile, sources: Vec<SourceUnit>) -> Self {
        AuditInputs {
            app: app.into(),
            profile,
            sources,
            manifest: None,
            layouts: Vec::new(),
            permission_map: None,
            indexers: BUILTIN_INDEXERS.iter().map(|s| (*s).to_owned()).collect(),
            priority_threshold: crate::index::DEFAULT_PRIORITY_THRESHOLD,
        }
    }
}

/// A frozen, indexed graph with the context analyzers need.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub app: String,
    pub graph: Arc<ProgramGraph>,
    pub context: AnalysisContext,
    pub index_report: IndexReport,
    pub warnings: Vec<Warning>,
}

/// Parses every input, runs the index pipeline and freezes the graph.
pub fn ingest(inputs: &AuditInputs, schedule: Schedule) -> Result<Ingested, AuditError> {
    let mut warnings = Vec::new();
    let mut builder = parse_miniapp(&inputs.sources, &inputs.profile)?;
    let mut callbacks = Vec::new();
    for layout in &inputs.layouts {
        callbacks.extend(parse_layout(&mut builder, &layout.path, &layout.text)?);
    }
    let manifest = match &inputs.manifest {
        Some(f) => {
            let (m, w) = parse_manifest(&f.path, &f.text)?;
            warnings.extend(w);
            m
        }
        None => ManifestModel::default(),
    };
    let permissions = match &inputs.permission_map {
        Some(f) => {
            let (m, w) = parse_permission_map(&f.path, &f.text)?;
            warnings.extend(w);
            m
        }
        None => PermissionMap::default(),
    };
    let index_inputs = IndexInputs {
        profile: inputs.profile.clone(),
        manifest,
        permissions,
        callbacks,
    };
    let pipeline = IndexPipeline::builtin(&inputs.indexers, inputs.priority_threshold)?;
    let (graph, index_report) = pipeline.run(builder, &index_inputs, schedule)?;
    warnings.extend(index_report.warnings.iter().cloned());
    let context = AnalysisContext {
        graph: Arc::clone(&graph),
        profile: index_inputs.profile,
        permissions: index_inputs.permissions,
        manifest: index_inputs.manifest,
        completed: index_report.completed(),
    };
    Ok(Ingested {
        app: inputs.app.clone(),
        graph,
        context,
        index_report,
        warnings,
    })
}
