//! Portable graph JSON.
//!
//! Exports list nodes then edges in ascending id order, so exporting the
//! same graph always yields the same bytes.

use serde::{Deserialize, Serialize};

use super::FrontendError;
use crate::graph::{tags, EdgeRecord, NodeId, NodeRecord, ProgramGraph};
use crate::query::Subgraph;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl GraphDocument {
    pub fn of_graph(graph: &ProgramGraph) -> Self {
        GraphDocument {
            nodes: graph.nodes().cloned().collect(),
            edges: graph.edges().cloned().collect(),
        }
    }

    pub fn of_subgraph(sub: &Subgraph) -> Self {
        let g = sub.graph();
        GraphDocument {
            nodes: sub.nodes().iter().filter_map(|id| g.node(*id)).cloned().collect(),
            edges: sub.edges().iter().filter_map(|id| g.edge(*id)).cloned().collect(),
        }
    }

    fn to_text(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("graph documents always serialize");
        text.push('\n');
        text
    }
}

pub fn export_graph_json(graph: &ProgramGraph) -> String {
    GraphDocument::of_graph(graph).to_text()
}

/// Exports the records of a subgraph; importing the result gives a graph
/// with the same ids.
pub fn export_subgraph_json(sub: &Subgraph) -> String {
    GraphDocument::of_subgraph(sub).to_text()
}

fn schema(path: String, message: impl Into<String>) -> FrontendError {
    FrontendError::Schema {
        path,
        message: message.into(),
    }
}

pub fn import_graph_json(text: &str) -> Result<ProgramGraph, FrontendError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: GraphDocument =
        serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;

    let mut seen_nodes = std::collections::BTreeSet::<NodeId>::new();
    for (i, node) in doc.nodes.iter().enumerate() {
        if !seen_nodes.insert(node.id) {
            return Err(schema(format!("nodes[{i}].id"), format!("duplicate node id `{}`", node.id)));
        }
        if node.kind().is_none() {
            return Err(schema(format!("nodes[{i}].tags"), "node carries no kind tag"));
        }
    }
    let mut seen_edges = std::collections::BTreeSet::new();
    for (i, edge) in doc.edges.iter().enumerate() {
        if !seen_edges.insert(edge.id) {
            return Err(schema(format!("edges[{i}].id"), format!("duplicate edge id `{}`", edge.id)));
        }
        let kinds = edge.tags.iter().filter(|t| tags::is_edge_kind(t)).count();
        if kinds != 1 {
            return Err(schema(
                format!("edges[{i}].tags"),
                format!("edge must carry exactly one kind tag, found {kinds}"),
            ));
        }
        for (field, end) in [("from", edge.from), ("to", edge.to)] {
            if !seen_nodes.contains(&end) {
                return Err(schema(format!("edges[{i}].{field}"), format!("unknown node id `{end}`")));
            }
        }
    }
    Ok(ProgramGraph::from_records(doc.nodes, doc.edges)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs;
    use crate::graph::GraphBuilder;

    fn sample() -> ProgramGraph {
        let mut b = GraphBuilder::new();
        let a = b.add_node(tags::METHOD, "a", attrs!("arity" => 0i64)).unwrap();
        let c = b.add_node(tags::METHOD, "c", attrs!("flag" => true)).unwrap();
        let e = b.add_edge(tags::CALL, a, c, attrs!()).unwrap();
        b.tag_edge(e, tags::RTA_FEASIBLE).unwrap();
        b.freeze().as_ref().clone()
    }

    #[test]
    fn round_trip_is_identity() {
        let g = sample();
        let text = export_graph_json(&g);
        let back = import_graph_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(export_graph_json(&back), text);
    }

    #[test]
    fn dangling_edge_reports_path() {
        let text = r#"{"nodes":[{"id":"n0","tags":["METHOD"],"attrs":{}}],
                       "edges":[{"id":"e0","from":"n0","to":"n9","tags":["CALL"],"attrs":{}}]}"#;
        match import_graph_json(text) {
            Err(FrontendError::Schema { path, .. }) => assert_eq!(path, "edges[0].to"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structural_errors_report_path() {
        let text = r#"{"nodes":[{"id":"x0","tags":[],"attrs":{}}],"edges":[]}"#;
        match import_graph_json(text) {
            Err(FrontendError::Schema { path, .. }) => assert_eq!(path, "nodes[0].id"),
            other => panic!("{other:?}"),
        }
        let text = r#"{"nodes":[{"id":"n0","tags":["METHOD"],"attrs":{"x":[1]}}],"edges":[]}"#;
        assert!(matches!(import_graph_json(text), Err(FrontendError::Schema { .. })));
        let text = r#"{"nodes":[{"id":"n0","tags":["HUH"],"attrs":{}}],"edges":[]}"#;
        match import_graph_json(text) {
            Err(FrontendError::Schema { path, .. }) => assert_eq!(path, "nodes[0].tags"),
            other => panic!("{other:?}"),
        }
    }
}
