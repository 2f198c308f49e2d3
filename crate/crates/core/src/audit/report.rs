//! Deterministic audit reports. Nothing time- or schedule-dependent goes in.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AuditState, RunOutcome, RunStatus};
use crate::analyze::{Category, Finding, Registry};
use crate::frontend::{GraphDocument, Warning};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalyzerOutcome {
    pub name: String,
    pub category: Option<Category>,
    pub status: RunStatus,
    pub findings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportItem {
    pub id: String,
    pub analyzer: String,
    pub category: Category,
    pub findings: Vec<Finding>,
    pub subgraph: GraphDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub app: String,
    pub graph_hash: String,
    pub analyzers: Vec<AnalyzerOutcome>,
    pub work_items: Vec<ReportItem>,
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn new(registry: &Registry, state: &AuditState, run: &RunOutcome, warnings: &[Warning]) -> Self {
        let analyzers = run
            .log
            .iter()
            .map(|r| AnalyzerOutcome {
                name: r.analyzer.clone(),
                category: registry.descriptor(&r.analyzer).ok().map(|d| d.category),
                status: r.status,
                findings: r.findings,
                error: r.error.clone(),
            })
            .collect();
        let work_items = state
            .work_items
            .iter()
            .filter_map(|w| {
                let envelope = run.envelopes.get(&w.analyzer)?;
                Some(ReportItem {
                    id: w.id.clone(),
                    analyzer: w.analyzer.clone(),
                    category: w.category,
                    findings: w.findings.clone(),
                    subgraph: GraphDocument::of_subgraph(&envelope.subgraph),
                })
            })
            .collect();
        AuditReport {
            app: state.app.clone(),
            graph_hash: state.graph_hash.clone(),
            analyzers,
            work_items,
            warnings: warnings.iter().map(|w| w.0.clone()).collect(),
        }
    }

    pub fn has_findings(&self) -> bool {
        !self.work_items.is_empty()
    }

    pub fn has_failures(&self) -> bool {
        self.analyzers.iter().any(|a| a.status == RunStatus::Failed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Plain-text summary: CIA items first, then smells, then properties.
pub fn render_text(report: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "audit of {}", report.app);
    let _ = writeln!(out, "graph {}", report.graph_hash);
    let mut items: Vec<&ReportItem> = report.work_items.iter().collect();
    items.sort_by_key(|i| (i.category.severity_rank(), i.analyzer.clone()));
    if items.is_empty() {
        let _ = writeln!(out, "\nno findings");
    }
    for item in items {
        let _ = writeln!(
            out,
            "\n[{}] {} ({}, {} finding{})",
            item.category,
            item.analyzer,
            item.id,
            item.findings.len(),
            if item.findings.len() == 1 { "" } else { "s" }
        );
        for f in &item.findings {
            let at = f
                .spans
                .first()
                .map(|s| format!(" at {} bytes {}..{}", s.path, s.start, s.end))
                .unwrap_or_default();
            let _ = writeln!(out, "  - {}{at}", f.message);
        }
    }
    let satisfied: Vec<&str> = report
        .analyzers
        .iter()
        .filter(|a| a.status == RunStatus::Satisfied)
        .map(|a| a.name.as_str())
        .collect();
    if !satisfied.is_empty() {
        let _ = writeln!(out, "\nsatisfied: {}", satisfied.join(", "));
    }
    for a in report.analyzers.iter().filter(|a| a.status == RunStatus::Failed) {
        let _ = writeln!(out, "failed: {}: {}", a.name, a.error.as_deref().unwrap_or("unknown error"));
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(out, "\nwarnings:");
        for w in &report.warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    out
}
