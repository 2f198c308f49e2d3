//! Analyzers: named, categorized traversals that return an envelope, a
//! subgraph that is empty exactly when the checked property holds.

mod builtin;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{GraphDocument, ManifestModel, PermissionMap, PlatformProfile};
use crate::graph::tags::{self, attr};
use crate::graph::{ElementId, ProgramGraph, SourceSpan};
use crate::query::Subgraph;

pub use builtin::{
    broadcast_blockers_query, classify_permissions, AvailabilityAnalyzer, BroadcastBlockerAnalyzer,
    ConfidentialityAnalyzer, IntegrityAnalyzer, NativeCodeAnalyzer, PermissionClassification,
    PermissionUsageAnalyzer, ReflectionAnalyzer, BROADCAST_BLOCKERS_SCRIPT,
};

pub const ENTRY_REACHABLE_ONLY: &str = "entry-reachable-only";
pub const ONE_STEP_BROADEN: &str = "one-step-broaden";
pub const CONTINUATIONS: &[&str] = &[ENTRY_REACHABLE_ONLY, ONE_STEP_BROADEN];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Property,
    Smell,
    Confidentiality,
    Integrity,
    Availability,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Property,
        Category::Smell,
        Category::Confidentiality,
        Category::Integrity,
        Category::Availability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Property => "PROPERTY",
            Category::Smell => "SMELL",
            Category::Confidentiality => "CONFIDENTIALITY",
            Category::Integrity => "INTEGRITY",
            Category::Availability => "AVAILABILITY",
        }
    }

    /// Presentation rank: CIA categories first, then smells, then properties.
    pub fn severity_rank(self) -> u8 {
        match self {
            Category::Confidentiality | Category::Integrity | Category::Availability => 0,
            Category::Smell => 1,
            Category::Property => 2,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerDescriptor {
    pub name: String,
    pub category: Category,
    pub description: String,
    pub assumptions: String,
    /// Indexer or analyzer names that must have completed first.
    pub dependencies: Vec<String>,
    pub continuations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finding {
    pub message: String,
    pub anchors: Vec<ElementId>,
    pub spans: Vec<SourceSpan>,
}

/// Source spans of graph elements: node spans, and the call-site span
/// recorded on edges.
pub fn spans_of(graph: &ProgramGraph, elements: &[ElementId]) -> Vec<SourceSpan> {
    let mut out = Vec::new();
    for el in elements {
        let span = match el {
            ElementId::Node(id) => graph.node(*id).and_then(|n| n.span.clone()),
            ElementId::Edge(id) => graph.edge(*id).and_then(|e| {
                let path = e.attrs.get(attr::SPAN_PATH)?.as_str()?;
                Some(SourceSpan {
                    path: path.to_owned(),
                    start: e.attrs.get(attr::SPAN_START)?.as_int()?.max(0) as usize,
                    end: e.attrs.get(attr::SPAN_END)?.as_int()?.max(0) as usize,
                })
            }),
        };
        if let Some(s) = span {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

impl Finding {
    pub fn new(graph: &ProgramGraph, message: impl Into<String>, anchors: Vec<ElementId>) -> Self {
        Finding {
            spans: spans_of(graph, &anchors),
            message: message.into(),
            anchors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub analyzer: String,
    pub category: Category,
    pub findings: Vec<Finding>,
    pub subgraph: Subgraph,
}

impl Envelope {
    /// Normalizes an analyzer result: findings sorted and deduplicated,
    /// anchors added to the subgraph, and the subgraph cleared when there
    /// is nothing to report.
    pub fn new(analyzer: &str, category: Category, subgraph: Subgraph, mut findings: Vec<Finding>) -> Self {
        findings.sort();
        findings.dedup();
        let graph = Arc::clone(subgraph.graph());
        let subgraph = if findings.is_empty() {
            Subgraph::empty(&graph)
        } else {
            let anchors = Subgraph::from_elements(&graph, findings.iter().flat_map(|f| f.anchors.iter().copied()));
            subgraph.union(&anchors).expect("anchors come from the same graph")
        };
        Envelope {
            analyzer: analyzer.to_owned(),
            category,
            findings,
            subgraph,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn document(&self) -> EnvelopeDocument {
        EnvelopeDocument {
            analyzer: self.analyzer.clone(),
            category: self.category,
            findings: self.findings.clone(),
            subgraph: GraphDocument::of_subgraph(&self.subgraph),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document()).expect("envelopes always serialize")
    }
}

/// Serialized form of an [`Envelope`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeDocument {
    pub analyzer: String,
    pub category: Category,
    pub findings: Vec<Finding>,
    pub subgraph: GraphDocument,
}

/// Read-only inputs shared by analyzers.
#[derive(Debug, Clone)]
pub struct AnalysisContext {
    pub graph: Arc<ProgramGraph>,
    pub profile: PlatformProfile,
    pub permissions: PermissionMap,
    pub manifest: ManifestModel,
    /// Indexers and analyzers that have already completed.
    pub completed: BTreeSet<String>,
}

impl AnalysisContext {
    pub fn new(graph: Arc<ProgramGraph>) -> Self {
        AnalysisContext {
            graph,
            profile: PlatformProfile::default(),
            permissions: PermissionMap::default(),
            manifest: ManifestModel::default(),
            completed: BTreeSet::new(),
        }
    }
}

pub trait Analyzer: Send + Sync {
    fn descriptor(&self) -> AnalyzerDescriptor;
    fn analyze(&self, ctx: &AnalysisContext) -> Envelope;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyzerError {
    #[error("unknown analyzer `{0}`")]
    UnknownAnalyzer(String),
    #[error("duplicate analyzer `{0}`")]
    DuplicateAnalyzer(String),
    #[error("analyzer `{analyzer}` needs `{dependency}`, which has not run")]
    UnmetDependency { analyzer: String, dependency: String },
    #[error("unknown continuation `{0}`")]
    UnknownContinuation(String),
    #[error("analyzer `{analyzer}` does not declare continuation `{continuation}`")]
    UndeclaredContinuation { analyzer: String, continuation: String },
}

/// Analyzers by name.
pub struct Registry {
    analyzers: BTreeMap<String, Arc<dyn Analyzer>>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.analyzers.keys()).finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            analyzers: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        let all: Vec<Arc<dyn Analyzer>> = vec![
            Arc::new(AvailabilityAnalyzer),
            Arc::new(BroadcastBlockerAnalyzer),
            Arc::new(ConfidentialityAnalyzer),
            Arc::new(IntegrityAnalyzer),
            Arc::new(NativeCodeAnalyzer),
            Arc::new(PermissionUsageAnalyzer),
            Arc::new(ReflectionAnalyzer),
        ];
        for a in all {
            r.register(a).expect("built-in names are distinct");
        }
        r
    }

    pub fn register(&mut self, analyzer: Arc<dyn Analyzer>) -> Result<(), AnalyzerError> {
        let name = analyzer.descriptor().name;
        if self.analyzers.contains_key(&name) {
            return Err(AnalyzerError::DuplicateAnalyzer(name));
        }
        self.analyzers.insert(name, analyzer);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.analyzers.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn Analyzer>, AnalyzerError> {
        self.analyzers
            .get(name)
            .ok_or_else(|| AnalyzerError::UnknownAnalyzer(name.to_owned()))
    }

    pub fn descriptor(&self, name: &str) -> Result<AnalyzerDescriptor, AnalyzerError> {
        Ok(self.get(name)?.descriptor())
    }

    /// Runs one analyzer after checking that its dependencies completed.
    pub fn run(&self, name: &str, ctx: &AnalysisContext) -> Result<Envelope, AnalyzerError> {
        let analyzer = self.get(name)?;
        let d = analyzer.descriptor();
        if let Some(dep) = d.dependencies.iter().find(|dep| !ctx.completed.contains(*dep)) {
            return Err(AnalyzerError::UnmetDependency {
                analyzer: d.name,
                dependency: dep.clone(),
            });
        }
        Ok(analyzer.analyze(ctx))
    }

    pub fn apply_continuation(&self, envelope: &Envelope, continuation: &str) -> Result<Envelope, AnalyzerError> {
        if !CONTINUATIONS.contains(&continuation) {
            return Err(AnalyzerError::UnknownContinuation(continuation.to_owned()));
        }
        let d = self.descriptor(&envelope.analyzer)?;
        if !d.continuations.iter().any(|c| c == continuation) {
            return Err(AnalyzerError::UndeclaredContinuation {
                analyzer: d.name,
                continuation: continuation.to_owned(),
            });
        }
        Ok(apply_continuation(envelope, continuation).expect("name checked above"))
    }
}

/// Forward closure of the entry points over feasible calls, control flow,
/// data flow and method-body declarations.
pub fn entry_reachable(graph: &Arc<ProgramGraph>) -> Subgraph {
    let universe = Subgraph::universe(graph);
    let feasible_calls = universe.edges_tagged_any([tags::RTA_FEASIBLE]);
    let flows = universe.edges_tagged_any([tags::CONTROL_FLOW, tags::DATA_FLOW]);
    let bodies = Subgraph::from_parts(
        graph,
        std::iter::empty(),
        graph
            .edges_tagged(tags::DECLARES)
            .filter(|e| !graph.node_has_tag(e.from, tags::TYPE) && !graph.node_has_tag(e.from, tags::XML_ELEMENT))
            .map(|e| e.id),
    );
    let relation = feasible_calls
        .union(&flows)
        .and_then(|s| s.union(&bodies))
        .expect("same graph");
    relation.forward(&Subgraph::nodes_with_tag(graph, tags::ENTRY_POINT))
}

/// Applies a continuation regardless of which analyzer produced the
/// envelope.
pub fn apply_continuation(envelope: &Envelope, continuation: &str) -> Result<Envelope, AnalyzerError> {
    let graph = Arc::clone(envelope.subgraph.graph());
    match continuation {
        ENTRY_REACHABLE_ONLY => {
            let live = entry_reachable(&graph);
            let refined = envelope.subgraph.intersection(&live).expect("same graph");
            let findings = envelope
                .findings
                .iter()
                .filter(|f| {
                    f.anchors.iter().all(|a| match a {
                        ElementId::Node(n) => refined.contains_node(*n),
                        ElementId::Edge(e) => refined.contains_edge(*e),
                    })
                })
                .cloned()
                .collect();
            Ok(Envelope::new(&envelope.analyzer, envelope.category, refined, findings))
        }
        ONE_STEP_BROADEN => {
            let universe = Subgraph::universe(&graph);
            let wider = envelope
                .subgraph
                .union(&universe.forward_step(&envelope.subgraph))
                .and_then(|s| s.union(&universe.reverse_step(&envelope.subgraph)))
                .expect("same graph");
            Ok(Envelope {
                subgraph: wider,
                ..envelope.clone()
            })
        }
        other => Err(AnalyzerError::UnknownContinuation(other.to_owned())),
    }
}
