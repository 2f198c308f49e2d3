//! Layout subset: nested view elements, optionally with click handlers.

use super::xml::{self, Element};
use super::FrontendError;
use crate::attrs;
use crate::graph::tags::{self, attr};
use crate::graph::{GraphBuilder, NodeId, SourceSpan, Value};

/// A handler reference waiting for the callback indexer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingCallback {
    pub element: NodeId,
    pub handler: String,
}

/// Adds one XML_ELEMENT node per element of the layout at `path`, with
/// DECLARES edges from parent to child. Attributes are stored with an `@`
/// prefix; the node name is the element's `id` when present.
pub fn parse_layout(builder: &mut GraphBuilder, path: &str, text: &str) -> Result<Vec<PendingCallback>, FrontendError> {
    let root = xml::parse(path, text)?;
    let mut pending = Vec::new();
    add(builder, path, &root, None, &mut pending)?;
    Ok(pending)
}

fn add(
    builder: &mut GraphBuilder,
    path: &str,
    el: &Element,
    parent: Option<NodeId>,
    pending: &mut Vec<PendingCallback>,
) -> Result<(), FrontendError> {
    let mut a = attrs!(attr::ELEMENT => el.name.as_str(), attr::FILE => path);
    for (k, v) in &el.attrs {
        a.insert(format!("@{k}"), Value::from(v.as_str()));
    }
    let name = el.attr("id").unwrap_or(&el.name).to_owned();
    let span = SourceSpan {
        path: path.to_owned(),
        start: el.offset,
        end: el.offset,
    };
    let node = builder.add_node_spanned(tags::XML_ELEMENT, &name, a, Some(span))?;
    if let Some(p) = parent {
        builder.add_edge(tags::DECLARES, p, node, attrs!())?;
    }
    if let Some(handler) = el.attr("onClick") {
        pending.push(PendingCallback {
            element: node,
            handler: handler.to_owned(),
        });
    }
    for child in &el.children {
        add(builder, path, child, Some(node), pending)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handlers_and_nesting() {
        let mut b = GraphBuilder::new();
        let text = r#"<view id="root"><view id="send" onClick="sendIt"/><view id="label"/></view>"#;
        let pending = parse_layout(&mut b, "main.xml", text).unwrap();
        assert_eq!(pending.len(), 1);
        assert_eq!(pending[0].handler, "sendIt");
        let g = b.freeze();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges_tagged(tags::DECLARES).count(), 2);
        let send = g.node(pending[0].element).unwrap();
        assert_eq!(send.name(), "send");
        assert_eq!(send.attr_str("@onClick"), Some("sendIt"));
    }

    #[test]
    fn no_handlers() {
        let mut b = GraphBuilder::new();
        assert!(parse_layout(&mut b, "l.xml", "<view><view/></view>").unwrap().is_empty());
    }
}
