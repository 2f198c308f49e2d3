//! Graphviz rendering of a subgraph.

use std::fmt::Write;

use crate::query::Subgraph;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// One statement per node and edge, in id order. Labels show the name and
/// tag set; ids are kept as DOT identifiers.
pub fn export_dot(sub: &Subgraph) -> String {
    let g = sub.graph();
    let mut out = String::from("digraph evidence {\n");
    for id in sub.nodes() {
        let Some(n) = g.node(*id) else { continue };
        let tags: Vec<&str> = n.tags.iter().map(String::as_str).collect();
        let label = format!("{}\n[{}]", n.name(), tags.join(", "));
        let _ = writeln!(out, "  {} [label={}];", id, quote(&label));
    }
    for id in sub.edges() {
        let Some(e) = g.edge(*id) else { continue };
        let tags: Vec<&str> = e.tags.iter().map(String::as_str).collect();
        let _ = writeln!(
            out,
            "  {} -> {} [id={}, label={}];",
            e.from,
            e.to,
            quote(&id.to_string()),
            quote(&tags.join(", "))
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs;
    use crate::graph::{tags, GraphBuilder};

    #[test]
    fn one_statement_per_node() {
        let mut b = GraphBuilder::new();
        let ids: Vec<_> = (0..5)
            .map(|i| b.add_node(tags::METHOD, &format!("m\"{i}"), attrs!()).unwrap())
            .collect();
        b.add_edge(tags::CALL, ids[0], ids[1], attrs!()).unwrap();
        let g = b.freeze();
        let dot = export_dot(&Subgraph::universe(&g));
        assert_eq!(dot.lines().filter(|l| l.contains("[label=")).count(), 5);
        assert!(dot.contains("n0 -> n1"));
        assert!(dot.contains("m\\\"0"));
        assert!(dot.contains("CALL"));
    }
}
