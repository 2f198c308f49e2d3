//! Attributed, tagged, directed multigraph of program artifacts.
//!
//! A graph is assembled through a [`GraphBuilder`] (parsing and indexing)
//! and then frozen into an immutable [`ProgramGraph`] shared behind an
//! [`Arc`]. Queries and analyzers only ever see frozen snapshots.

pub mod tags;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph is frozen; structural and tag mutation is no longer permitted")]
    Frozen,
    #[error("edge endpoint {0} does not exist")]
    UnknownEndpoint(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("`{0}` is not a node kind")]
    NotANodeKind(String),
    #[error("`{0}` is not an edge kind")]
    NotAnEdgeKind(String),
    #[error("kind tag `{0}` cannot be applied after construction")]
    KindTagNotAdditive(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
}

macro_rules! graph_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix($prefix)
                    .filter(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|digits| digits.parse().ok())
                    .map($name)
                    .ok_or_else(|| format!(concat!("expected `", $prefix, "<number>`, found `{}`"), s))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = String::deserialize(deserializer)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

graph_id!(NodeId, "n");
graph_id!(EdgeId, "e");

/// Either kind of graph element; used where an API accepts both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementId {
    Node(NodeId),
    Edge(EdgeId),
}

impl From<NodeId> for ElementId {
    fn from(id: NodeId) -> Self {
        ElementId::Node(id)
    }
}

impl From<EdgeId> for ElementId {
    fn from(id: EdgeId) -> Self {
        ElementId::Edge(id)
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementId::Node(id) => id.fmt(f),
            ElementId::Edge(id) => id.fmt(f),
        }
    }
}

impl FromStr for ElementId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with('n') {
            s.parse().map(ElementId::Node)
        } else if s.starts_with('e') {
            s.parse().map(ElementId::Edge)
        } else {
            Err(format!("`{s}` is neither a node nor an edge id"))
        }
    }
}

impl Serialize for ElementId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Scalar attribute value. Nested values are not representable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => b.fmt(f),
            Value::Int(i) => i.fmt(f),
            Value::Str(s) => s.fmt(f),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

pub type Attrs = BTreeMap<String, Value>;

/// Builds an attribute map from `key => value` pairs.
#[macro_export]
macro_rules! attrs {
    () => { $crate::graph::Attrs::new() };
    ($($key:expr => $value:expr),+ $(,)?) => {{
        let mut map = $crate::graph::Attrs::new();
        $( map.insert(String::from($key), $crate::graph::Value::from($value)); )+
        map
    }};
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpan {
    pub path: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub tags: BTreeSet<String>,
    pub attrs: Attrs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SourceSpan>,
}

impl NodeRecord {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn name(&self) -> &str {
        self.attr_str(tags::attr::NAME).unwrap_or("")
    }

    pub fn attr_str(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).and_then(Value::as_str)
    }

    pub fn attr_int(&self, key: &str) -> Option<i64> {
        self.attrs.get(key).and_then(Value::as_int)
    }

    /// The first tag that belongs to the node-kind vocabulary.
    pub fn kind(&self) -> Option<&str> {
        self.tags.iter().map(String::as_str).find(|t| tags::is_node_kind(t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub tags: BTreeSet<String>,
    pub attrs: Attrs,
}

impl EdgeRecord {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn kind(&self) -> Option<&str> {
        self.tags.iter().map(String::as_str).find(|t| tags::is_edge_kind(t))
    }
}

/// The program graph. Mutable only through a [`GraphBuilder`]; shared
/// read-only once frozen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProgramGraph {
    nodes: BTreeMap<NodeId, NodeRecord>,
    edges: BTreeMap<EdgeId, EdgeRecord>,
    outgoing: BTreeMap<NodeId, Vec<EdgeId>>,
    incoming: BTreeMap<NodeId, Vec<EdgeId>>,
    next_node: u32,
    next_edge: u32,
}

impl ProgramGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a graph from explicit records, keeping their ids.
    pub fn from_records(
        nodes: impl IntoIterator<Item = NodeRecord>,
        edges: impl IntoIterator<Item = EdgeRecord>,
    ) -> Result<Self, GraphError> {
        let mut graph = ProgramGraph::new();
        for node in nodes {
            if graph.nodes.contains_key(&node.id) {
                return Err(GraphError::DuplicateId(node.id.to_string()));
            }
            graph.next_node = graph.next_node.max(node.id.0 + 1);
            graph.nodes.insert(node.id, node);
        }
        for edge in edges {
            if graph.edges.contains_key(&edge.id) {
                return Err(GraphError::DuplicateId(edge.id.to_string()));
            }
            for end in [edge.from, edge.to] {
                if !graph.nodes.contains_key(&end) {
                    return Err(GraphError::UnknownEndpoint(end));
                }
            }
            graph.next_edge = graph.next_edge.max(edge.id.0 + 1);
            graph.link(edge);
        }
        Ok(graph)
    }

    fn link(&mut self, edge: EdgeRecord) {
        self.outgoing.entry(edge.from).or_default().push(edge.id);
        self.incoming.entry(edge.to).or_default().push(edge.id);
        self.edges.insert(edge.id, edge);
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&EdgeRecord> {
        self.edges.get(&id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        self.edges.contains_key(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> + '_ {
        self.nodes.values()
    }

    /// Edges in ascending id order.
    pub fn edges(&self) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.edges.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn outgoing(&self, id: NodeId) -> &[EdgeId] {
        self.outgoing.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn incoming(&self, id: NodeId) -> &[EdgeId] {
        self.incoming.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn nodes_tagged<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a NodeRecord> + 'a {
        self.nodes.values().filter(move |n| n.has_tag(tag))
    }

    pub fn edges_tagged<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        self.edges.values().filter(move |e| e.has_tag(tag))
    }

    /// Outgoing edges of `id` that carry `tag`.
    pub fn out_tagged<'a>(&'a self, id: NodeId, tag: &'a str) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        self.outgoing(id)
            .iter()
            .map(move |e| &self.edges[e])
            .filter(move |e| e.has_tag(tag))
    }

    pub fn in_tagged<'a>(&'a self, id: NodeId, tag: &'a str) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        self.incoming(id)
            .iter()
            .map(move |e| &self.edges[e])
            .filter(move |e| e.has_tag(tag))
    }

    pub fn node_has_tag(&self, id: NodeId, tag: &str) -> bool {
        self.nodes.get(&id).is_some_and(|n| n.has_tag(tag))
    }

    pub fn name(&self, id: NodeId) -> &str {
        self.nodes.get(&id).map(NodeRecord::name).unwrap_or("")
    }

    /// Full-scan check that every edge endpoint resolves.
    pub fn check_endpoint_closure(&self) -> Result<(), GraphError> {
        for edge in self.edges.values() {
            for end in [edge.from, edge.to] {
                if !self.nodes.contains_key(&end) {
                    return Err(GraphError::UnknownEndpoint(end));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
enum BuildState {
    Open(ProgramGraph),
    Frozen(Arc<ProgramGraph>),
}

/// Single-writer construction handle for a [`ProgramGraph`].
#[derive(Debug)]
pub struct GraphBuilder {
    state: BuildState,
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::from_graph(ProgramGraph::new())
    }

    pub fn from_graph(graph: ProgramGraph) -> Self {
        GraphBuilder { state: BuildState::Open(graph) }
    }

    pub fn graph(&self) -> &ProgramGraph {
        match &self.state {
            BuildState::Open(g) => g,
            BuildState::Frozen(g) => g,
        }
    }

    pub fn is_frozen(&self) -> bool {
        matches!(self.state, BuildState::Frozen(_))
    }

    fn open(&mut self) -> Result<&mut ProgramGraph, GraphError> {
        match &mut self.state {
            BuildState::Open(g) => Ok(g),
            BuildState::Frozen(_) => Err(GraphError::Frozen),
        }
    }

    pub fn add_node(&mut self, kind: &str, name: &str, attrs: Attrs) -> Result<NodeId, GraphError> {
        self.add_node_spanned(kind, name, attrs, None)
    }

    pub fn add_node_spanned(
        &mut self,
        kind: &str,
        name: &str,
        mut attrs: Attrs,
        span: Option<SourceSpan>,
    ) -> Result<NodeId, GraphError> {
        if !tags::is_node_kind(kind) {
            return Err(GraphError::NotANodeKind(kind.to_owned()));
        }
        let graph = self.open()?;
        let id = NodeId(graph.next_node);
        graph.next_node += 1;
        attrs.insert(tags::attr::NAME.to_owned(), Value::from(name));
        let node = NodeRecord {
            id,
            tags: BTreeSet::from([kind.to_owned()]),
            attrs,
            span,
        };
        graph.nodes.insert(id, node);
        Ok(id)
    }

    pub fn add_edge(&mut self, kind: &str, from: NodeId, to: NodeId, attrs: Attrs) -> Result<EdgeId, GraphError> {
        if !tags::is_edge_kind(kind) {
            return Err(GraphError::NotAnEdgeKind(kind.to_owned()));
        }
        let graph = self.open()?;
        for end in [from, to] {
            if !graph.nodes.contains_key(&end) {
                return Err(GraphError::UnknownEndpoint(end));
            }
        }
        let id = EdgeId(graph.next_edge);
        graph.next_edge += 1;
        graph.link(EdgeRecord {
            id,
            from,
            to,
            tags: BTreeSet::from([kind.to_owned()]),
            attrs,
        });
        Ok(id)
    }

    /// Adds `tag` to every target. Idempotent; returns the number of
    /// distinct targets that carry the tag afterwards.
    pub fn apply_tag(&mut self, targets: &[ElementId], tag: &str) -> Result<usize, GraphError> {
        if tags::is_node_kind(tag) || tags::is_edge_kind(tag) {
            return Err(GraphError::KindTagNotAdditive(tag.to_owned()));
        }
        let graph = self.open()?;
        // Validate everything first so a failing call leaves the graph untouched.
        for target in targets {
            match *target {
                ElementId::Node(id) if !graph.nodes.contains_key(&id) => return Err(GraphError::UnknownNode(id)),
                ElementId::Edge(id) if !graph.edges.contains_key(&id) => return Err(GraphError::UnknownEdge(id)),
                _ => {}
            }
        }
        let distinct: BTreeSet<ElementId> = targets.iter().copied().collect();
        for target in &distinct {
            let set = match *target {
                ElementId::Node(id) => &mut graph.nodes.get_mut(&id).expect("validated").tags,
                ElementId::Edge(id) => &mut graph.edges.get_mut(&id).expect("validated").tags,
            };
            set.insert(tag.to_owned());
        }
        Ok(distinct.len())
    }

    pub fn tag_node(&mut self, id: NodeId, tag: &str) -> Result<(), GraphError> {
        self.apply_tag(&[ElementId::Node(id)], tag).map(drop)
    }

    pub fn tag_edge(&mut self, id: EdgeId, tag: &str) -> Result<(), GraphError> {
        self.apply_tag(&[ElementId::Edge(id)], tag).map(drop)
    }

    pub fn set_attr(&mut self, target: ElementId, key: &str, value: Value) -> Result<(), GraphError> {
        let graph = self.open()?;
        let attrs = match target {
            ElementId::Node(id) => &mut graph.nodes.get_mut(&id).ok_or(GraphError::UnknownNode(id))?.attrs,
            ElementId::Edge(id) => &mut graph.edges.get_mut(&id).ok_or(GraphError::UnknownEdge(id))?.attrs,
        };
        attrs.insert(key.to_owned(), value);
        Ok(())
    }

    /// Freezes the graph. Calling it again returns the same snapshot.
    pub fn freeze(&mut self) -> Arc<ProgramGraph> {
        if let BuildState::Frozen(g) = &self.state {
            return Arc::clone(g);
        }
        let graph = match std::mem::replace(&mut self.state, BuildState::Open(ProgramGraph::new())) {
            BuildState::Open(g) => Arc::new(g),
            BuildState::Frozen(_) => unreachable!(),
        };
        self.state = BuildState::Frozen(Arc::clone(&graph));
        graph
    }
}
