//! Work items and the persisted audit state.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AuditError, RunOutcome, RunRecord};
use crate::analyze::{Category, Envelope, Finding};
use crate::frontend::export_graph_json;
use crate::graph::{EdgeId, ElementId, NodeId, ProgramGraph};
use crate::query::Subgraph;

/// SHA-256 of the canonical graph JSON export, hex encoded.
pub fn graph_hash(graph: &ProgramGraph) -> String {
    hex::encode(Sha256::digest(export_graph_json(graph).as_bytes()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeRef {
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<EdgeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactOverrides {
    pub added: BTreeSet<ElementId>,
    pub removed: BTreeSet<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WorkItem {
    pub id: String,
    pub analyzer: String,
    pub category: Category,
    pub name: String,
    pub color: String,
    pub reviewed: bool,
    pub notes: String,
    pub findings: Vec<Finding>,
    pub envelope: EnvelopeRef,
    pub artifact_overrides: ArtifactOverrides,
}

impl WorkItem {
    fn from_envelope(id: String, envelope: &Envelope) -> Self {
        WorkItem {
            id,
            analyzer: envelope.analyzer.clone(),
            category: envelope.category,
            name: envelope.analyzer.clone(),
            color: String::new(),
            reviewed: false,
            notes: String::new(),
            findings: envelope.findings.clone(),
            envelope: EnvelopeRef {
                nodes: envelope.subgraph.nodes().clone(),
                edges: envelope.subgraph.edges().clone(),
            },
            artifact_overrides: ArtifactOverrides::default(),
        }
    }

    /// `(envelope ∪ added) − removed`; edges that lose an endpoint are
    /// dropped and added edges bring their endpoints.
    pub fn effective(&self, graph: &Arc<ProgramGraph>) -> Subgraph {
        let o = &self.artifact_overrides;
        let removed_nodes: BTreeSet<NodeId> = o.removed.iter().filter_map(node_of).collect();
        let removed_edges: BTreeSet<EdgeId> = o.removed.iter().filter_map(edge_of).collect();
        let mut nodes: BTreeSet<NodeId> = self.envelope.nodes.clone();
        let mut edges: BTreeSet<EdgeId> = self.envelope.edges.clone();
        nodes.extend(o.added.iter().filter_map(node_of));
        for e in o.added.iter().filter_map(edge_of) {
            if let Some(rec) = graph.edge(e) {
                edges.insert(e);
                nodes.insert(rec.from);
                nodes.insert(rec.to);
            }
        }
        nodes.retain(|n| !removed_nodes.contains(n));
        edges.retain(|e| {
            !removed_edges.contains(e)
                && graph
                    .edge(*e)
                    .is_some_and(|r| nodes.contains(&r.from) && nodes.contains(&r.to))
        });
        Subgraph::from_parts(graph, nodes, edges)
    }
}

fn node_of(e: &ElementId) -> Option<NodeId> {
    match e {
        ElementId::Node(n) => Some(*n),
        ElementId::Edge(_) => None,
    }
}

fn edge_of(e: &ElementId) -> Option<EdgeId> {
    match e {
        ElementId::Edge(id) => Some(*id),
        ElementId::Node(_) => None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkItemFilter {
    #[serde(default)]
    pub category: Option<Category>,
    #[serde(default)]
    pub reviewed: Option<bool>,
}

impl WorkItemFilter {
    pub fn matches(&self, item: &WorkItem) -> bool {
        self.category.is_none_or(|c| c == item.category) && self.reviewed.is_none_or(|r| r == item.reviewed)
    }
}

/// Editable work-item fields; absent fields are left alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkItemPatch {
    #[serde(default)]
    pub reviewed: Option<bool>,
    #[serde(default)]
    pub notes: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JournalEntry {
    pub seq: u64,
    pub item: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuditState {
    pub app: String,
    pub graph_hash: String,
    pub work_items: Vec<WorkItem>,
    pub run_log: Vec<RunRecord>,
    #[serde(default)]
    pub journal: Vec<JournalEntry>,
}

impl AuditState {
    pub fn new(app: impl Into<String>, graph: &ProgramGraph) -> Self {
        AuditState {
            app: app.into(),
            graph_hash: graph_hash(graph),
            work_items: Vec::new(),
            run_log: Vec::new(),
            journal: Vec::new(),
        }
    }

    /// State for a finished run: one work item per non-empty envelope, in
    /// analyzer-name order.
    pub fn from_run(app: impl Into<String>, graph: &ProgramGraph, run: &RunOutcome) -> Self {
        let mut state = Self::new(app, graph);
        state.record_run(run);
        state
    }

    /// Replaces the work items of every analyzer in `run` and appends its
    /// log. Items of other analyzers keep their ids and edits.
    pub fn record_run(&mut self, run: &RunOutcome) {
        self.work_items.retain(|w| !run.envelopes.contains_key(&w.analyzer));
        for envelope in run.non_empty() {
            let id = format!("w{}", self.next_item_number());
            self.work_items.push(WorkItem::from_envelope(id, envelope));
        }
        self.work_items
            .sort_by(|a, b| (&a.analyzer, item_number(&a.id)).cmp(&(&b.analyzer, item_number(&b.id))));
        self.run_log.extend(run.log.iter().cloned());
    }

    fn next_item_number(&self) -> u64 {
        self.work_items.iter().map(|w| item_number(&w.id)).max().unwrap_or(0) + 1
    }

    pub fn list(&self, filter: &WorkItemFilter) -> Vec<&WorkItem> {
        self.work_items.iter().filter(|w| filter.matches(w)).collect()
    }

    pub fn get(&self, id: &str) -> Result<&WorkItem, AuditError> {
        self.work_items
            .iter()
            .find(|w| w.id == id)
            .ok_or_else(|| AuditError::UnknownWorkItem(id.to_owned()))
    }

    fn get_mut(&mut self, id: &str) -> Result<&mut WorkItem, AuditError> {
        self.work_items
            .iter_mut()
            .find(|w| w.id == id)
            .ok_or_else(|| AuditError::UnknownWorkItem(id.to_owned()))
    }

    fn journal(&mut self, item: &str, action: String) {
        let seq = self.journal.last().map_or(1, |j| j.seq + 1);
        self.journal.push(JournalEntry {
            seq,
            item: item.to_owned(),
            action,
        });
    }

    pub fn patch(&mut self, id: &str, patch: &WorkItemPatch) -> Result<&WorkItem, AuditError> {
        let item = self.get_mut(id)?;
        let mut actions = Vec::new();
        if let Some(r) = patch.reviewed {
            item.reviewed = r;
            actions.push(format!("reviewed={r}"));
        }
        if let Some(n) = &patch.notes {
            item.notes = n.clone();
            actions.push("notes".to_owned());
        }
        if let Some(n) = &patch.name {
            item.name = n.clone();
            actions.push(format!("name={n}"));
        }
        if let Some(c) = &patch.color {
            item.color = c.clone();
            actions.push(format!("color={c}"));
        }
        for a in actions {
            self.journal(id, a);
        }
        self.get(id)
    }

    pub fn mark_reviewed(&mut self, id: &str, reviewed: bool) -> Result<&WorkItem, AuditError> {
        self.patch(id, &WorkItemPatch { reviewed: Some(reviewed), ..Default::default() })
    }

    pub fn set_notes(&mut self, id: &str, notes: &str) -> Result<&WorkItem, AuditError> {
        self.patch(id, &WorkItemPatch { notes: Some(notes.to_owned()), ..Default::default() })
    }

    pub fn rename(&mut self, id: &str, name: &str) -> Result<&WorkItem, AuditError> {
        self.patch(id, &WorkItemPatch { name: Some(name.to_owned()), ..Default::default() })
    }

    pub fn recolor(&mut self, id: &str, color: &str) -> Result<&WorkItem, AuditError> {
        self.patch(id, &WorkItemPatch { color: Some(color.to_owned()), ..Default::default() })
    }

    fn check_artifacts(graph: &ProgramGraph, ids: &[ElementId]) -> Result<(), AuditError> {
        for id in ids {
            let known = match id {
                ElementId::Node(n) => graph.contains_node(*n),
                ElementId::Edge(e) => graph.contains_edge(*e),
            };
            if !known {
                return Err(AuditError::UnknownArtifact(id.to_string()));
            }
        }
        Ok(())
    }

    /// Adds and removes artifacts in one step; validation happens before
    /// any change, so a bad id leaves the item untouched.
    pub fn edit_artifacts(
        &mut self,
        graph: &ProgramGraph,
        id: &str,
        add: &[ElementId],
        remove: &[ElementId],
    ) -> Result<&WorkItem, AuditError> {
        self.get(id)?;
        Self::check_artifacts(graph, add)?;
        Self::check_artifacts(graph, remove)?;
        let item = self.get_mut(id)?;
        for a in add {
            item.artifact_overrides.removed.remove(a);
            item.artifact_overrides.added.insert(*a);
        }
        for r in remove {
            item.artifact_overrides.added.remove(r);
            item.artifact_overrides.removed.insert(*r);
        }
        let join = |ids: &[ElementId]| ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        if !add.is_empty() {
            self.journal(id, format!("add {}", join(add)));
        }
        if !remove.is_empty() {
            self.journal(id, format!("remove {}", join(remove)));
        }
        self.get(id)
    }

    pub fn add_artifacts(&mut self, graph: &ProgramGraph, id: &str, ids: &[ElementId]) -> Result<&WorkItem, AuditError> {
        self.edit_artifacts(graph, id, ids, &[])
    }

    pub fn remove_artifacts(
        &mut self,
        graph: &ProgramGraph,
        id: &str,
        ids: &[ElementId],
    ) -> Result<&WorkItem, AuditError> {
        self.edit_artifacts(graph, id, &[], ids)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("audit state serializes");
        s.push('\n');
        s
    }

    /// Parses a saved state and checks it against `graph`.
    pub fn from_json(text: &str, graph: &ProgramGraph) -> Result<Self, AuditError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let state: AuditState = serde_path_to_error::deserialize(de).map_err(|e| AuditError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let found = graph_hash(graph);
        if state.graph_hash != found {
            return Err(AuditError::HashMismatch {
                expected: state.graph_hash,
                found,
            });
        }
        for item in &state.work_items {
            let ids: Vec<ElementId> = item
                .envelope
                .nodes
                .iter()
                .map(|n| ElementId::Node(*n))
                .chain(item.envelope.edges.iter().map(|e| ElementId::Edge(*e)))
                .chain(item.artifact_overrides.added.iter().copied())
                .chain(item.artifact_overrides.removed.iter().copied())
                .collect();
            Self::check_artifacts(graph, &ids)?;
        }
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<(), AuditError> {
        std::fs::write(path, self.to_json()).map_err(|e| AuditError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path, graph: &ProgramGraph) -> Result<Self, AuditError> {
        let text = std::fs::read_to_string(path).map_err(|e| AuditError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, graph)
    }
}

fn item_number(id: &str) -> u64 {
    id.strip_prefix('w').and_then(|n| n.parse().ok()).unwrap_or(0)
}
