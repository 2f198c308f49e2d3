//! Selection-driven standard slices.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::AuditError;
use crate::graph::tags;
use crate::graph::{NodeId, ProgramGraph};
use crate::query::Subgraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SmartViewKind {
    ForwardData,
    ReverseData,
    ForwardCall,
    ReverseCall,
    DeclarationStructure,
    TypeHierarchy,
    XmlCallbacks,
    ReverseDataIntoXml,
}

impl SmartViewKind {
    pub const ALL: [SmartViewKind; 8] = [
        SmartViewKind::ForwardData,
        SmartViewKind::ReverseData,
        SmartViewKind::ForwardCall,
        SmartViewKind::ReverseCall,
        SmartViewKind::DeclarationStructure,
        SmartViewKind::TypeHierarchy,
        SmartViewKind::XmlCallbacks,
        SmartViewKind::ReverseDataIntoXml,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SmartViewKind::ForwardData => "FORWARD_DATA",
            SmartViewKind::ReverseData => "REVERSE_DATA",
            SmartViewKind::ForwardCall => "FORWARD_CALL",
            SmartViewKind::ReverseCall => "REVERSE_CALL",
            SmartViewKind::DeclarationStructure => "DECLARATION_STRUCTURE",
            SmartViewKind::TypeHierarchy => "TYPE_HIERARCHY",
            SmartViewKind::XmlCallbacks => "XML_CALLBACKS",
            SmartViewKind::ReverseDataIntoXml => "REVERSE_DATA_INTO_XML",
        }
    }
}

impl fmt::Display for SmartViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SmartViewKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown smart view kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Steps {
    Count(usize),
    #[default]
    Fixpoint,
}

impl FromStr for Steps {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("fixpoint") {
            return Ok(Steps::Fixpoint);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Steps::Count(n)),
            _ => Err(AuditError::InvalidSteps(s.to_owned())),
        }
    }
}

impl fmt::Display for Steps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Steps::Count(n) => write!(f, "{n}"),
            Steps::Fixpoint => f.write_str("fixpoint"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmartViewRequest {
    pub selection: Vec<NodeId>,
    pub kind: SmartViewKind,
    pub steps: Steps,
    /// Restrict call views to RTA_FEASIBLE edges.
    pub feasible_only: bool,
}

impl SmartViewRequest {
    pub fn new(selection: Vec<NodeId>, kind: SmartViewKind) -> Self {
        SmartViewRequest {
            selection,
            kind,
            steps: Steps::Fixpoint,
            feasible_only: false,
        }
    }
}

fn forward(relation: &Subgraph, origin: &Subgraph, steps: Steps) -> Subgraph {
    match steps {
        Steps::Count(n) => relation.forward_steps(origin, n),
        Steps::Fixpoint => relation.forward(origin),
    }
}

fn reverse(relation: &Subgraph, origin: &Subgraph, steps: Steps) -> Subgraph {
    match steps {
        Steps::Count(n) => relation.reverse_steps(origin, n),
        Steps::Fixpoint => relation.reverse(origin),
    }
}

pub fn smart_view(graph: &Arc<ProgramGraph>, request: &SmartViewRequest) -> Result<Subgraph, AuditError> {
    if request.selection.is_empty() {
        return Err(AuditError::EmptySelection);
    }
    if let Steps::Count(0) = request.steps {
        return Err(AuditError::InvalidSteps("0".into()));
    }
    if let Some(missing) = request.selection.iter().find(|n| !graph.contains_node(**n)) {
        return Err(AuditError::UnknownNode(missing.to_string()));
    }
    let universe = Subgraph::universe(graph);
    let origin = Subgraph::from_nodes(graph, request.selection.iter().copied());
    let steps = request.steps;
    let same = "same graph";
    let calls = || {
        let c = universe.edges_tagged_any([tags::CALL]);
        if request.feasible_only {
            c.edges_tagged_any([tags::RTA_FEASIBLE])
        } else {
            c
        }
    };
    let view = match request.kind {
        SmartViewKind::ForwardData => forward(&universe.edges_tagged_any([tags::DATA_FLOW]), &origin, steps),
        SmartViewKind::ReverseData => reverse(&universe.edges_tagged_any([tags::DATA_FLOW]), &origin, steps),
        SmartViewKind::ForwardCall => forward(&calls(), &origin, steps),
        SmartViewKind::ReverseCall => reverse(&calls(), &origin, steps),
        SmartViewKind::DeclarationStructure => {
            reverse(&universe.edges_tagged_any([tags::DECLARES]), &origin, steps)
        }
        SmartViewKind::TypeHierarchy => {
            let ext = universe.edges_tagged_any([tags::EXTENDS]);
            forward(&ext, &origin, steps)
                .union(&reverse(&ext, &origin, steps))
                .expect(same)
        }
        SmartViewKind::XmlCallbacks => {
            // Selecting either the element or the handler finds the link;
            // the handler's calls then follow for `steps`.
            let cb = universe.edges_tagged_any([tags::XML_CALLBACK]);
            let linked = cb.reverse(&origin).union(&cb.forward(&origin)).expect(same);
            linked.union(&forward(&calls(), &linked, steps)).expect(same)
        }
        SmartViewKind::ReverseDataIntoXml => {
            let xml_declares = Subgraph::from_parts(
                graph,
                [],
                graph
                    .edges_tagged(tags::DECLARES)
                    .filter(|e| graph.node_has_tag(e.from, tags::XML_ELEMENT))
                    .map(|e| e.id),
            );
            let relation = universe
                .edges_tagged_any([tags::DATA_FLOW, tags::XML_CALLBACK])
                .union(&xml_declares)
                .expect(same);
            reverse(&relation, &origin, steps)
        }
    };
    Ok(view)
}
