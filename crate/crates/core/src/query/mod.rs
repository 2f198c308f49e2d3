//! Composable queries over a frozen [`ProgramGraph`].
//!
//! Every operation consumes and produces [`Subgraph`] values: a node set
//! and an edge set over one snapshot, with every edge's endpoints present
//! in the node set. Operations are pure and never touch the graph.

pub mod script;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{tags, EdgeId, ElementId, NodeId, ProgramGraph};

pub use script::{eval_query, parse_query, QueryScript, SyntaxError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("operands belong to different graph snapshots")]
    MixedGraph,
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

#[derive(Clone)]
pub struct Subgraph {
    graph: Arc<ProgramGraph>,
    nodes: BTreeSet<NodeId>,
    edges: BTreeSet<EdgeId>,
}

impl fmt::Debug for Subgraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Subgraph")
            .field("nodes", &self.nodes)
            .field("edges", &self.edges)
            .finish()
    }
}

/// Equal when over the same snapshot with identical node and edge sets.
impl PartialEq for Subgraph {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.graph, &other.graph) && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for Subgraph {}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Reverse,
}

impl Subgraph {
    pub fn empty(graph: &Arc<ProgramGraph>) -> Self {
        Subgraph {
            graph: Arc::clone(graph),
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
        }
    }

    /// The whole graph.
    pub fn universe(graph: &Arc<ProgramGraph>) -> Self {
        Subgraph {
            graph: Arc::clone(graph),
            nodes: graph.node_ids().collect(),
            edges: graph.edge_ids().collect(),
        }
    }

    /// Nodes only; unknown ids are dropped.
    pub fn from_nodes(graph: &Arc<ProgramGraph>, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        Subgraph {
            graph: Arc::clone(graph),
            nodes: nodes.into_iter().filter(|n| graph.contains_node(*n)).collect(),
            edges: BTreeSet::new(),
        }
    }

    /// Builds a subgraph from explicit sets. Endpoints of the given edges
    /// are added to the node set; unknown ids are dropped.
    pub fn from_parts(
        graph: &Arc<ProgramGraph>,
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = EdgeId>,
    ) -> Self {
        let mut sub = Subgraph::from_nodes(graph, nodes);
        for id in edges {
            if let Some(edge) = graph.edge(id) {
                sub.edges.insert(id);
                sub.nodes.insert(edge.from);
                sub.nodes.insert(edge.to);
            }
        }
        sub
    }

    pub fn from_elements(graph: &Arc<ProgramGraph>, elements: impl IntoIterator<Item = ElementId>) -> Self {
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        for element in elements {
            match element {
                ElementId::Node(n) => nodes.push(n),
                ElementId::Edge(e) => edges.push(e),
            }
        }
        Subgraph::from_parts(graph, nodes, edges)
    }

    /// All nodes tagged with `tag`, no edges.
    pub fn nodes_with_tag(graph: &Arc<ProgramGraph>, tag: &str) -> Self {
        Subgraph::universe(graph).nodes_tagged_any([tag])
    }

    pub fn graph(&self) -> &Arc<ProgramGraph> {
        &self.graph
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<EdgeId> {
        &self.edges
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        self.edges.contains(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn same_graph(&self, other: &Subgraph) -> bool {
        Arc::ptr_eq(&self.graph, &other.graph)
    }

    /// True when every edge has both endpoints in the node set and every
    /// id belongs to the graph.
    pub fn is_endpoint_closed(&self) -> bool {
        self.nodes.iter().all(|n| self.graph.contains_node(*n))
            && self.edges.iter().all(|e| match self.graph.edge(*e) {
                Some(edge) => self.nodes.contains(&edge.from) && self.nodes.contains(&edge.to),
                None => false,
            })
    }

    /// `self` contains every node and edge of `other`.
    pub fn is_superset(&self, other: &Subgraph) -> bool {
        self.nodes.is_superset(&other.nodes) && self.edges.is_superset(&other.edges)
    }

    fn with(&self, nodes: BTreeSet<NodeId>, edges: BTreeSet<EdgeId>) -> Subgraph {
        Subgraph {
            graph: Arc::clone(&self.graph),
            nodes,
            edges,
        }
    }

    /// Drops edges with an endpoint outside the node set.
    fn repaired(mut self) -> Subgraph {
        let graph = Arc::clone(&self.graph);
        let nodes = &self.nodes;
        self.edges.retain(|e| {
            let edge = graph.edge(*e).expect("subgraph edge belongs to graph");
            nodes.contains(&edge.from) && nodes.contains(&edge.to)
        });
        self
    }

    pub fn nodes_tagged_any<I, S>(&self, tags: I) -> Subgraph
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tags: Vec<S> = tags.into_iter().collect();
        let nodes = self
            .nodes
            .iter()
            .copied()
            .filter(|n| {
                let node = self.graph.node(*n).expect("subgraph node belongs to graph");
                tags.iter().any(|t| node.has_tag(t.as_ref()))
            })
            .collect();
        self.with(nodes, self.edges.clone()).repaired()
    }

    /// Keeps every node; keeps the edges carrying at least one of `tags`.
    pub fn edges_tagged_any<I, S>(&self, tags: I) -> Subgraph
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tags: Vec<S> = tags.into_iter().collect();
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|e| {
                let edge = self.graph.edge(*e).expect("subgraph edge belongs to graph");
                tags.iter().any(|t| edge.has_tag(t.as_ref()))
            })
            .collect();
        self.with(self.nodes.clone(), edges)
    }

    /// Drops nodes that are not incident to any edge.
    pub fn retain_edges(&self) -> Subgraph {
        let mut nodes = BTreeSet::new();
        for e in &self.edges {
            let edge = self.graph.edge(*e).expect("subgraph edge belongs to graph");
            nodes.insert(edge.from);
            nodes.insert(edge.to);
        }
        self.with(nodes, self.edges.clone())
    }

    fn check_same(&self, other: &Subgraph) -> Result<(), QueryError> {
        if self.same_graph(other) {
            Ok(())
        } else {
            Err(QueryError::MixedGraph)
        }
    }

    pub fn union(&self, other: &Subgraph) -> Result<Subgraph, QueryError> {
        self.check_same(other)?;
        Ok(self.with(
            self.nodes.union(&other.nodes).copied().collect(),
            self.edges.union(&other.edges).copied().collect(),
        ))
    }

    pub fn intersection(&self, other: &Subgraph) -> Result<Subgraph, QueryError> {
        self.check_same(other)?;
        Ok(self
            .with(
                self.nodes.intersection(&other.nodes).copied().collect(),
                self.edges.intersection(&other.edges).copied().collect(),
            )
            .repaired())
    }

    pub fn difference(&self, other: &Subgraph) -> Result<Subgraph, QueryError> {
        self.check_same(other)?;
        Ok(self
            .with(
                self.nodes.difference(&other.nodes).copied().collect(),
                self.edges.difference(&other.edges).copied().collect(),
            )
            .repaired())
    }

    fn traverse(&self, origin: &Subgraph, direction: Direction, max_steps: Option<usize>) -> Subgraph {
        let mut seen: BTreeSet<NodeId> = origin
            .nodes
            .iter()
            .copied()
            .filter(|n| self.graph.contains_node(*n))
            .collect();
        let mut edges = BTreeSet::new();
        let mut frontier: VecDeque<(NodeId, usize)> = seen.iter().map(|n| (*n, 0)).collect();
        while let Some((node, depth)) = frontier.pop_front() {
            if max_steps.is_some_and(|max| depth >= max) {
                continue;
            }
            let adjacent = match direction {
                Direction::Forward => self.graph.outgoing(node),
                Direction::Reverse => self.graph.incoming(node),
            };
            for e in adjacent {
                if !self.edges.contains(e) {
                    continue;
                }
                let edge = self.graph.edge(*e).expect("adjacent edge exists");
                let next = match direction {
                    Direction::Forward => edge.to,
                    Direction::Reverse => edge.from,
                };
                edges.insert(*e);
                if seen.insert(next) {
                    frontier.push_back((next, depth + 1));
                }
            }
        }
        self.with(seen, edges)
    }

    /// Everything reachable from `origin` along the edges of `self`,
    /// together with the traversed edges. Origin nodes are always kept.
    pub fn forward(&self, origin: &Subgraph) -> Subgraph {
        self.traverse(origin, Direction::Forward, None)
    }

    /// As [`forward`](Self::forward), following edges backwards.
    pub fn reverse(&self, origin: &Subgraph) -> Subgraph {
        self.traverse(origin, Direction::Reverse, None)
    }

    pub fn forward_step(&self, origin: &Subgraph) -> Subgraph {
        self.traverse(origin, Direction::Forward, Some(1))
    }

    pub fn reverse_step(&self, origin: &Subgraph) -> Subgraph {
        self.traverse(origin, Direction::Reverse, Some(1))
    }

    /// Bounded traversal: at most `steps` hops from the origin.
    pub fn forward_steps(&self, origin: &Subgraph, steps: usize) -> Subgraph {
        self.traverse(origin, Direction::Forward, Some(steps))
    }

    pub fn reverse_steps(&self, origin: &Subgraph, steps: usize) -> Subgraph {
        self.traverse(origin, Direction::Reverse, Some(steps))
    }

    /// Nodes and edges on some directed path from a `from` node to a `to`
    /// node within `self`.
    pub fn between(&self, from: &Subgraph, to: &Subgraph) -> Subgraph {
        self.forward(from)
            .intersection(&self.reverse(to))
            .expect("both operands derive from self")
    }

    /// Methods called `method` declared by a type called `type_name`.
    pub fn method_select(graph: &Arc<ProgramGraph>, type_name: &str, method: &str) -> Subgraph {
        let mut nodes = BTreeSet::new();
        for ty in graph.nodes_tagged(tags::TYPE).filter(|t| t.name() == type_name) {
            for declares in graph.out_tagged(ty.id, tags::DECLARES) {
                let target = graph.node(declares.to).expect("endpoint exists");
                if target.has_tag(tags::METHOD) && target.name() == method {
                    nodes.insert(target.id);
                }
            }
        }
        Subgraph::from_nodes(graph, nodes)
    }

    pub fn elements(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.nodes
            .iter()
            .map(|n| ElementId::Node(*n))
            .chain(self.edges.iter().map(|e| ElementId::Edge(*e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs;
    use crate::graph::GraphBuilder;

    /// A→B, B→C, D→C plus an isolated E.
    fn diamondish() -> (Arc<ProgramGraph>, [NodeId; 5], [EdgeId; 3]) {
        let mut b = GraphBuilder::new();
        let ids: Vec<NodeId> = ["A", "B", "C", "D", "E"]
            .iter()
            .map(|n| b.add_node(tags::METHOD, n, attrs!()).unwrap())
            .collect();
        let ab = b.add_edge(tags::CALL, ids[0], ids[1], attrs!()).unwrap();
        let bc = b.add_edge(tags::CALL, ids[1], ids[2], attrs!()).unwrap();
        let dc = b.add_edge(tags::CALL, ids[3], ids[2], attrs!()).unwrap();
        (b.freeze(), [ids[0], ids[1], ids[2], ids[3], ids[4]], [ab, bc, dc])
    }

    #[test]
    fn universe_of_empty_graph_is_empty() {
        let g = GraphBuilder::new().freeze();
        assert!(Subgraph::universe(&g).is_empty());
    }

    #[test]
    fn retain_edges_drops_isolated_nodes() {
        let (g, [_, _, _, _, e], _) = diamondish();
        let q = Subgraph::universe(&g).retain_edges();
        assert_eq!(q.nodes().len(), 4);
        assert!(!q.contains_node(e));
        assert_eq!(q.retain_edges(), q);
    }

    #[test]
    fn forward_follows_reachability() {
        let (g, [a, b, c, _, _], [ab, bc, _]) = diamondish();
        let q = Subgraph::universe(&g);
        let out = q.forward(&Subgraph::from_nodes(&g, [a]));
        assert_eq!(out.nodes(), &BTreeSet::from([a, b, c]));
        assert_eq!(out.edges(), &BTreeSet::from([ab, bc]));
        assert!(q.forward(&Subgraph::empty(&g)).is_empty());
    }

    #[test]
    fn reverse_from_sink() {
        let (g, [a, b, c, d, _], _) = diamondish();
        let q = Subgraph::universe(&g);
        let out = q.reverse(&Subgraph::from_nodes(&g, [c]));
        assert_eq!(out.nodes(), &BTreeSet::from([a, b, c, d]));
        let lone = q.reverse(&Subgraph::from_nodes(&g, [a]));
        assert_eq!(lone.nodes(), &BTreeSet::from([a]));
        assert!(lone.edges().is_empty());
    }

    #[test]
    fn between_excludes_side_branches() {
        let (g, [a, b, c, d, _], [ab, bc, _]) = diamondish();
        let q = Subgraph::universe(&g);
        let out = q.between(&Subgraph::from_nodes(&g, [a]), &Subgraph::from_nodes(&g, [c]));
        assert_eq!(out.nodes(), &BTreeSet::from([a, b, c]));
        assert_eq!(out.edges(), &BTreeSet::from([ab, bc]));
        let none = q.between(&Subgraph::from_nodes(&g, [c]), &Subgraph::from_nodes(&g, [d]));
        assert!(none.is_empty());
    }

    #[test]
    fn steps_expand_one_hop() {
        let (g, [a, b, _, _, _], [ab, _, _]) = diamondish();
        let q = Subgraph::universe(&g);
        let out = q.forward_step(&Subgraph::from_nodes(&g, [a]));
        assert_eq!(out.nodes(), &BTreeSet::from([a, b]));
        assert_eq!(out.edges(), &BTreeSet::from([ab]));
        assert!(q.forward_step(&Subgraph::empty(&g)).is_empty());
    }

    #[test]
    fn origin_outside_query_is_kept() {
        let (g, [a, _, _, _, e], _) = diamondish();
        let calls = Subgraph::universe(&g).retain_edges();
        let out = calls.reverse(&Subgraph::from_nodes(&g, [e]));
        assert_eq!(out.nodes(), &BTreeSet::from([e]));
        let out = calls.forward(&Subgraph::from_nodes(&g, [a, e]));
        assert!(out.contains_node(e));
    }

    #[test]
    fn tag_filters() {
        let mut b = GraphBuilder::new();
        let x = b.add_node(tags::TYPE, "X", attrs!()).unwrap();
        let y = b.add_node(tags::TYPE, "Y", attrs!()).unwrap();
        let z = b.add_node(tags::TYPE, "Z", attrs!()).unwrap();
        b.add_edge(tags::EXTENDS, x, y, attrs!()).unwrap();
        let df = b.add_edge(tags::DATA_FLOW, y, z, attrs!()).unwrap();
        b.tag_node(x, "HOT").unwrap();
        b.tag_node(y, "HOT").unwrap();
        let g = b.freeze();
        let u = Subgraph::universe(&g);
        assert!(u.nodes_tagged_any(Vec::<&str>::new()).is_empty());
        assert_eq!(u.nodes_tagged_any([tags::TYPE]), u);
        let hot = u.nodes_tagged_any(["HOT"]);
        assert_eq!(hot.nodes().len(), 2);
        assert_eq!(hot.edges().len(), 1);
        let flows = u.edges_tagged_any([tags::DATA_FLOW]);
        assert_eq!(flows.nodes().len(), 3);
        assert_eq!(flows.edges(), &BTreeSet::from([df]));
        assert_eq!(flows.retain_edges().nodes(), &BTreeSet::from([y, z]));
        assert_eq!(u.edges_tagged_any(Vec::<&str>::new()).edges().len(), 0);
    }

    #[test]
    fn set_operations() {
        let (g, [a, b, ..], _) = diamondish();
        let u = Subgraph::universe(&g);
        let e = Subgraph::empty(&g);
        assert_eq!(u.union(&e).unwrap(), u);
        assert_eq!(u.intersection(&u).unwrap(), u);
        assert!(u.difference(&u).unwrap().is_empty());
        let without_b = u.difference(&Subgraph::from_nodes(&g, [b])).unwrap();
        assert!(without_b.is_endpoint_closed());
        assert!(without_b.contains_node(a));
        assert_eq!(without_b.edges().len(), 1);
    }

    #[test]
    fn mixed_graphs_are_rejected() {
        let (g1, ..) = diamondish();
        let (g2, ..) = diamondish();
        let err = Subgraph::universe(&g1).union(&Subgraph::universe(&g2));
        assert_eq!(err, Err(QueryError::MixedGraph));
    }

    #[test]
    fn method_select_matches_simple_names() {
        let mut b = GraphBuilder::new();
        let t1 = b.add_node(tags::TYPE, "Util", attrs!()).unwrap();
        let t2 = b.add_node(tags::TYPE, "Util", attrs!()).unwrap();
        let other = b.add_node(tags::TYPE, "Other", attrs!()).unwrap();
        let m1 = b.add_node(tags::METHOD, "run", attrs!()).unwrap();
        let m2 = b.add_node(tags::METHOD, "run", attrs!()).unwrap();
        let m3 = b.add_node(tags::METHOD, "run", attrs!()).unwrap();
        b.add_edge(tags::DECLARES, t1, m1, attrs!()).unwrap();
        b.add_edge(tags::DECLARES, t2, m2, attrs!()).unwrap();
        b.add_edge(tags::DECLARES, other, m3, attrs!()).unwrap();
        let g = b.freeze();
        let hit = Subgraph::method_select(&g, "Util", "run");
        assert_eq!(hit.nodes(), &BTreeSet::from([m1, m2]));
        assert!(hit.edges().is_empty());
        assert!(Subgraph::method_select(&g, "Nope", "run").is_empty());
    }
}
