use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{spans_of, AnalysisContext, Analyzer, AnalyzerDescriptor, Category, Envelope, Finding, CONTINUATIONS};
use crate::frontend::ManifestModel;
use crate::graph::tags::{self, attr};
use crate::graph::{EdgeId, ElementId, NodeId, ProgramGraph};
use crate::hierarchy::Hierarchy;
use crate::query::Subgraph;

fn descriptor(name: &str, category: Category, description: &str, assumptions: &str, deps: &[&str]) -> AnalyzerDescriptor {
    AnalyzerDescriptor {
        name: name.to_owned(),
        category,
        description: description.to_owned(),
        assumptions: assumptions.to_owned(),
        dependencies: deps.iter().map(|d| (*d).to_owned()).collect(),
        continuations: CONTINUATIONS.iter().map(|c| (*c).to_owned()).collect(),
    }
}

/// Human-readable name of a node for finding messages.
fn describe(graph: &ProgramGraph, hierarchy: &Hierarchy, id: NodeId) -> String {
    let Some(node) = graph.node(id) else {
        return id.to_string();
    };
    if node.has_tag(tags::METHOD) || node.has_tag(tags::FIELD) {
        return hierarchy.signature(graph, id);
    }
    if node.has_tag(tags::VARIABLE) {
        if let Some(m) = graph.in_tagged(id, tags::DECLARES).next() {
            return format!("{} `{}`", hierarchy.signature(graph, m.from), node.name());
        }
    }
    if node.has_tag(tags::CALLSITE_RESULT) {
        if let (Some(recv), Some(callee)) = (node.attr_str(attr::RECEIVER_TYPE), node.attr_str(attr::CALLEE)) {
            return format!("result of {recv}.{callee}");
        }
    }
    node.name().to_owned()
}

fn call_edges_into(graph: &ProgramGraph, tag: &str) -> Vec<EdgeId> {
    graph
        .edges_tagged(tags::CALL)
        .filter(|e| graph.node_has_tag(e.to, tag))
        .map(|e| e.id)
        .collect()
}

/// Value sources: results of calls that may dispatch to a SOURCE method,
/// and SOURCE-tagged fields.
fn taint_sources(graph: &ProgramGraph, hierarchy: &Hierarchy) -> BTreeSet<NodeId> {
    let mut out: BTreeSet<NodeId> = graph
        .nodes_tagged(tags::CALLSITE_RESULT)
        .filter(|cs| {
            hierarchy
                .callsite_targets(graph, cs.id)
                .iter()
                .any(|t| graph.node_has_tag(*t, tags::SOURCE))
        })
        .map(|n| n.id)
        .collect();
    out.extend(
        graph
            .nodes_tagged(tags::SOURCE)
            .filter(|n| n.has_tag(tags::FIELD))
            .map(|n| n.id),
    );
    out
}

/// Sinks: parameters of SINK methods and SINK-tagged fields.
fn taint_sinks(graph: &ProgramGraph, hierarchy: &Hierarchy) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for n in graph.nodes_tagged(tags::SINK) {
        if n.has_tag(tags::METHOD) {
            out.extend(hierarchy.params(n.id).iter().copied());
        } else if n.has_tag(tags::FIELD) {
            out.insert(n.id);
        }
    }
    out
}

fn data_flow(graph: &Arc<ProgramGraph>) -> Subgraph {
    Subgraph::universe(graph).edges_tagged_any([tags::DATA_FLOW])
}

// ---------------------------------------------------------------------------
// broadcast-blockers

/// The broadcast-blocker query as a script over the query language.
pub const BROADCAST_BLOCKERS_SCRIPT: &str = r#"universe().edgesTaggedAny(CALL).retainEdges().between(
  methods("BroadcastReceiver", "onReceive")
    .union(universe().edgesTaggedAny(OVERRIDES).retainEdges().reverse(methods("BroadcastReceiver", "onReceive")))
    .intersection(universe().edgesTaggedAny(DECLARES).retainEdges().forward(nodes(MANIFEST_HIGH_PRIORITY))),
  methods("BroadcastReceiver", "abortBroadcast")
    .union(methods("PendingResult", "abortBroadcast"))
    .union(universe().edgesTaggedAny(OVERRIDES).retainEdges().reverse(
      methods("BroadcastReceiver", "abortBroadcast").union(methods("PendingResult", "abortBroadcast"))))
)"#;

/// Intermediate results of the broadcast-blocker query.
#[derive(Debug, Clone)]
pub struct BroadcastBlockers {
    pub high_priority_on_receive: Subgraph,
    pub abort_broadcast: Subgraph,
    pub result: Subgraph,
}

/// CALL paths from `onReceive` implementations of high-priority receivers
/// to any `abortBroadcast`.
pub fn broadcast_blockers_query(graph: &Arc<ProgramGraph>) -> BroadcastBlockers {
    let universe = Subgraph::universe(graph);
    let same = "operands share one graph";
    let declares_edges = universe.edges_tagged_any([tags::DECLARES]).retain_edges();
    let call_edges = universe.edges_tagged_any([tags::CALL]).retain_edges();
    let overrides_edges = universe.edges_tagged_any([tags::OVERRIDES]).retain_edges();

    let mut abort_broadcast = Subgraph::method_select(graph, "BroadcastReceiver", "abortBroadcast")
        .union(&Subgraph::method_select(graph, "PendingResult", "abortBroadcast"))
        .expect(same);
    abort_broadcast = abort_broadcast
        .union(&overrides_edges.reverse(&abort_broadcast))
        .expect(same);

    let mut on_receive = Subgraph::method_select(graph, "BroadcastReceiver", "onReceive");
    on_receive = on_receive.union(&overrides_edges.reverse(&on_receive)).expect(same);

    let high_priority_types = universe.nodes_tagged_any([tags::MANIFEST_HIGH_PRIORITY]);
    let high_priority_on_receive = on_receive
        .intersection(&declares_edges.forward(&high_priority_types))
        .expect(same);
    let result = call_edges.between(&high_priority_on_receive, &abort_broadcast);
    BroadcastBlockers {
        high_priority_on_receive,
        abort_broadcast,
        result,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BroadcastBlockerAnalyzer;

impl Analyzer for BroadcastBlockerAnalyzer {
    fn descriptor(&self) -> AnalyzerDescriptor {
        descriptor(
            "broadcast-blockers",
            Category::Availability,
            "High-priority broadcast receivers whose onReceive can reach abortBroadcast.",
            "Call edges follow class-hierarchy dispatch; receiver priority comes from the manifest.",
            &["manifest"],
        )
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        let graph = &ctx.graph;
        let hierarchy = Hierarchy::build(graph);
        let q = broadcast_blockers_query(graph);
        let mut findings = Vec::new();
        for &from in q.result.nodes() {
            if !q.high_priority_on_receive.contains_node(from) {
                continue;
            }
            let reach = q.result.forward(&Subgraph::from_nodes(graph, [from]));
            for &to in reach.nodes() {
                if !q.abort_broadcast.contains_node(to) {
                    continue;
                }
                let priority = hierarchy
                    .owner(from)
                    .and_then(|t| graph.node(t))
                    .and_then(|t| t.attr_int(attr::PRIORITY))
                    .unwrap_or_default();
                let mut span_of: Vec<ElementId> = vec![from.into()];
                span_of.extend(
                    reach
                        .edges()
                        .iter()
                        .filter(|e| graph.edge(**e).is_some_and(|e| e.to == to))
                        .map(|e| ElementId::Edge(*e)),
                );
                findings.push(Finding {
                    message: format!(
                        "high-priority receiver `{}` (priority {priority}) can abort the broadcast through `{}`",
                        describe(graph, &hierarchy, from),
                        describe(graph, &hierarchy, to)
                    ),
                    anchors: vec![from.into(), to.into()],
                    spans: spans_of(graph, &span_of),
                });
            }
        }
        Envelope::new("broadcast-blockers", Category::Availability, q.result, findings)
    }
}

// ---------------------------------------------------------------------------
// permission-usage

/// Which permissions an app uses and declares.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PermissionClassification {
    /// Guarding some called method.
    pub used: BTreeSet<String>,
    /// Requested in the manifest.
    pub declared: BTreeSet<String>,
    /// Declared, never used.
    pub unused: BTreeSet<String>,
    /// Used, never declared.
    pub undeclared: BTreeSet<String>,
}

fn permissions_of(graph: &ProgramGraph, method: NodeId) -> Vec<String> {
    graph
        .node(method)
        .and_then(|n| n.attr_str(attr::PERMISSION))
        .map(|p| p.split(',').filter(|s| !s.is_empty()).map(str::to_owned).collect())
        .unwrap_or_default()
}

pub fn classify_permissions(graph: &ProgramGraph, manifest: &ManifestModel) -> PermissionClassification {
    let used: BTreeSet<String> = call_edges_into(graph, tags::PERMISSION_PROTECTED)
        .into_iter()
        .flat_map(|e| permissions_of(graph, graph.edge(e).expect("edge exists").to))
        .collect();
    let declared = manifest.permissions.clone();
    PermissionClassification {
        unused: declared.difference(&used).cloned().collect(),
        undeclared: used.difference(&declared).cloned().collect(),
        used,
        declared,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PermissionUsageAnalyzer;

impl Analyzer for PermissionUsageAnalyzer {
    fn descriptor(&self) -> AnalyzerDescriptor {
        descriptor(
            "permission-usage",
            Category::Property,
            "Calls to permission-protected methods, unused declarations and undeclared uses.",
            "A method guarded by several permissions uses each of them.",
            &["permissions"],
        )
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        let graph = &ctx.graph;
        let hierarchy = Hierarchy::build(graph);
        let class = classify_permissions(graph, &ctx.manifest);
        let usages = call_edges_into(graph, tags::PERMISSION_PROTECTED);
        let mut findings = Vec::new();
        let mut by_permission: BTreeMap<String, Vec<EdgeId>> = BTreeMap::new();
        for &e in &usages {
            let edge = graph.edge(e).expect("edge exists");
            let target = graph.node(edge.to).expect("endpoint exists");
            let perms = permissions_of(graph, edge.to);
            for p in &perms {
                by_permission.entry(p.clone()).or_default().push(e);
            }
            findings.push(Finding::new(
                graph,
                format!(
                    "`{}` calls `{}`, guarded by {} (protection level {}, group {})",
                    describe(graph, &hierarchy, edge.from),
                    describe(graph, &hierarchy, edge.to),
                    perms.join(", "),
                    target.attr_str(attr::PROTECTION_LEVEL).unwrap_or("unknown"),
                    target.attr_str(attr::GROUP).unwrap_or("none"),
                ),
                vec![e.into()],
            ));
        }
        let mut unused_nodes = Vec::new();
        for perm in &class.unused {
            let nodes: Vec<NodeId> = graph
                .nodes_tagged(tags::PERMISSION)
                .filter(|n| n.name() == perm && n.has_tag(tags::DECLARED))
                .map(|n| n.id)
                .collect();
            unused_nodes.extend(nodes.iter().copied());
            findings.push(Finding::new(
                graph,
                format!("[low] permission {perm} is declared but never used"),
                nodes.into_iter().map(ElementId::from).collect(),
            ));
        }
        for perm in &class.undeclared {
            let edges = by_permission.get(perm).cloned().unwrap_or_default();
            findings.push(Finding::new(
                graph,
                format!("[high] permission {perm} is used but not declared"),
                edges.into_iter().map(ElementId::from).collect(),
            ));
        }
        let sub = Subgraph::from_parts(graph, unused_nodes, usages);
        Envelope::new("permission-usage", Category::Property, sub, findings)
    }
}

// ---------------------------------------------------------------------------
// native-code, reflection

fn calls_into_tagged(ctx: &AnalysisContext, name: &str, category: Category, tag: &str, what: &str) -> Envelope {
    let graph = &ctx.graph;
    let hierarchy = Hierarchy::build(graph);
    let edges = call_edges_into(graph, tag);
    let findings = edges
        .iter()
        .map(|e| {
            let edge = graph.edge(*e).expect("edge exists");
            Finding::new(
                graph,
                format!(
                    "`{}` calls {what} `{}`",
                    describe(graph, &hierarchy, edge.from),
                    describe(graph, &hierarchy, edge.to)
                ),
                vec![(*e).into()],
            )
        })
        .collect();
    Envelope::new(name, category, Subgraph::from_parts(graph, [], edges), findings)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NativeCodeAnalyzer;

impl Analyzer for NativeCodeAnalyzer {
    fn descriptor(&self) -> AnalyzerDescriptor {
        descriptor(
            "native-code",
            Category::Property,
            "Calls into platform methods that load or run native code.",
            "Native entry points are the NATIVE-tagged profile methods.",
            &[],
        )
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        calls_into_tagged(ctx, "native-code", Category::Property, tags::NATIVE, "native method")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReflectionAnalyzer;

impl Analyzer for ReflectionAnalyzer {
    fn descriptor(&self) -> AnalyzerDescriptor {
        descriptor(
            "reflection",
            Category::Smell,
            "Reflective calls, which hide their real targets and need a justification.",
            "Reflective operations are the REFLECTION-tagged profile methods.",
            &[],
        )
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        calls_into_tagged(ctx, "reflection", Category::Smell, tags::REFLECTION, "reflective method")
    }
}

// ---------------------------------------------------------------------------
// confidentiality

#[derive(Debug, Clone, Copy, Default)]
pub struct ConfidentialityAnalyzer;

impl Analyzer for ConfidentialityAnalyzer {
    fn descriptor(&self) -> AnalyzerDescriptor {
        descriptor(
            "confidentiality",
            Category::Confidentiality,
            "Data-flow paths from sensitive sources to sinks.",
            "Flow-insensitive, context-insensitive data flow; no sanitizers.",
            &["xml-callbacks"],
        )
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        let graph = &ctx.graph;
        let hierarchy = Hierarchy::build(graph);
        let flow = data_flow(graph);
        let sources = taint_sources(graph, &hierarchy);
        let sinks = taint_sinks(graph, &hierarchy);
        let sinks_sub = Subgraph::from_nodes(graph, sinks.iter().copied());
        let mut findings = Vec::new();
        for &src in &sources {
            let reach = flow.forward(&Subgraph::from_nodes(graph, [src]));
            for &sink in reach.nodes().intersection(sinks_sub.nodes()) {
                if sink == src {
                    continue;
                }
                findings.push(Finding::new(
                    graph,
                    format!(
                        "sensitive value ({}) reaches sink {}",
                        describe(graph, &hierarchy, src),
                        describe(graph, &hierarchy, sink)
                    ),
                    vec![src.into(), sink.into()],
                ));
            }
        }
        let sub = flow.between(&Subgraph::from_nodes(graph, sources), &sinks_sub);
        Envelope::new("confidentiality", Category::Confidentiality, sub, findings)
    }
}

// ---------------------------------------------------------------------------
// integrity

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrityAnalyzer;

impl Analyzer for IntegrityAnalyzer {
    fn descriptor(&self) -> AnalyzerDescriptor {
        descriptor(
            "integrity",
            Category::Integrity,
            "Writes to sensitive mutable state, with the origins of the written values.",
            "Reads of sensitive state are not reported; a written value that derives from a source is also a confidentiality concern.",
            &["xml-callbacks"],
        )
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        let graph = &ctx.graph;
        let hierarchy = Hierarchy::build(graph);
        let flow = data_flow(graph);
        let sources = taint_sources(graph, &hierarchy);
        let mut targets = BTreeSet::new();
        let mut setters_without_params = BTreeSet::new();
        for n in graph.nodes_tagged(tags::SENSITIVE_MUTABLE) {
            if n.has_tag(tags::FIELD) {
                targets.insert(n.id);
            } else if n.has_tag(tags::METHOD) {
                let params = hierarchy.params(n.id);
                if params.is_empty() {
                    setters_without_params.insert(n.id);
                }
                targets.extend(params.iter().copied());
            }
        }
        let mut sub = Subgraph::empty(graph);
        let mut findings = Vec::new();
        for e in graph.edges_tagged(tags::DATA_FLOW).filter(|e| targets.contains(&e.to)) {
            let slice = flow.reverse(&Subgraph::from_nodes(graph, [e.from]));
            let origins: Vec<NodeId> = slice.nodes().intersection(&sources).copied().collect();
            let mut message = format!(
                "write to sensitive state {} from {}",
                describe(graph, &hierarchy, e.to),
                describe(graph, &hierarchy, e.from)
            );
            if !origins.is_empty() {
                let names: Vec<String> = origins.iter().map(|o| describe(graph, &hierarchy, *o)).collect();
                message.push_str(&format!(
                    " [cross-category: CONFIDENTIALITY, value derives from {}]",
                    names.join(", ")
                ));
            }
            findings.push(Finding::new(graph, message, vec![e.id.into()]));
            sub = sub
                .union(&slice)
                .and_then(|s| s.union(&Subgraph::from_parts(graph, [], [e.id])))
                .expect("same graph");
        }
        for e in graph.edges_tagged(tags::CALL).filter(|e| setters_without_params.contains(&e.to)) {
            findings.push(Finding::new(
                graph,
                format!(
                    "`{}` mutates sensitive state through `{}`",
                    describe(graph, &hierarchy, e.from),
                    describe(graph, &hierarchy, e.to)
                ),
                vec![e.id.into()],
            ));
            sub = sub.union(&Subgraph::from_parts(graph, [], [e.id])).expect("same graph");
        }
        Envelope::new("integrity", Category::Integrity, sub, findings)
    }
}

// ---------------------------------------------------------------------------
// availability

#[derive(Debug, Clone, Copy, Default)]
pub struct AvailabilityAnalyzer;

impl AvailabilityAnalyzer {
    /// Call sites declared by `stmt` that may dispatch to an EXPENSIVE method.
    fn expensive_calls(graph: &ProgramGraph, hierarchy: &Hierarchy, stmt: NodeId) -> Vec<(EdgeId, NodeId)> {
        let mut out = Vec::new();
        for d in graph.out_tagged(stmt, tags::DECLARES) {
            if !graph.node_has_tag(d.to, tags::CALLSITE_RESULT) {
                continue;
            }
            for t in hierarchy.callsite_targets(graph, d.to) {
                if graph.node_has_tag(t, tags::EXPENSIVE) {
                    out.push((d.id, t));
                }
            }
        }
        out
    }
}

impl Analyzer for AvailabilityAnalyzer {
    fn descriptor(&self) -> AnalyzerDescriptor {
        descriptor(
            "availability",
            Category::Availability,
            "Expensive platform calls inside loops or recursive call cycles.",
            "Loop bounds are not evaluated; every loop may iterate without limit.",
            &[],
        )
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        let graph = &ctx.graph;
        let hierarchy = Hierarchy::build(graph);
        let universe = Subgraph::universe(graph);
        let cfg = universe.edges_tagged_any([tags::CONTROL_FLOW]);
        let mut sub = Subgraph::empty(graph);
        let mut findings = Vec::new();
        let union = |a: &Subgraph, b: &Subgraph| a.union(b).expect("same graph");

        for header in graph.nodes_tagged(tags::STATEMENT) {
            if header.attr_str(attr::STATEMENT_KIND) != Some("while") {
                continue;
            }
            let head = Subgraph::from_nodes(graph, [header.id]);
            let body = cfg.between(&head, &head);
            let mut hits: BTreeMap<NodeId, Vec<EdgeId>> = BTreeMap::new();
            for &stmt in body.nodes() {
                for (decl, target) in Self::expensive_calls(graph, &hierarchy, stmt) {
                    hits.entry(target).or_default().push(decl);
                }
            }
            if hits.is_empty() {
                continue;
            }
            let method = graph.in_tagged(header.id, tags::DECLARES).next().map(|e| e.from);
            for (target, decls) in hits {
                let mut extra: Vec<EdgeId> = decls.clone();
                if let Some(m) = method {
                    extra.extend(graph.out_tagged(m, tags::CALL).filter(|e| e.to == target).map(|e| e.id));
                }
                let mut span_of: Vec<ElementId> = vec![header.id.into()];
                span_of.extend(decls.iter().filter_map(|d| graph.edge(*d)).map(|d| ElementId::Node(d.to)));
                findings.push(Finding {
                    message: format!(
                        "loop in `{}` calls expensive `{}`",
                        method.map(|m| describe(graph, &hierarchy, m)).unwrap_or_default(),
                        describe(graph, &hierarchy, target)
                    ),
                    anchors: vec![header.id.into(), target.into()],
                    spans: spans_of(graph, &span_of),
                });
                sub = union(&sub, &union(&body, &Subgraph::from_parts(graph, [], extra)));
            }
        }

        // Recursive call cycles: strongly connected components of the call
        // relation with more than one method or a self call.
        let mut pg: DiGraph<NodeId, EdgeId> = DiGraph::new();
        let mut index = BTreeMap::new();
        for e in graph.edges_tagged(tags::CALL) {
            let a = *index.entry(e.from).or_insert_with(|| pg.add_node(e.from));
            let b = *index.entry(e.to).or_insert_with(|| pg.add_node(e.to));
            pg.add_edge(a, b, e.id);
        }
        for scc in tarjan_scc(&pg) {
            let members: BTreeSet<NodeId> = scc.iter().map(|i| pg[*i]).collect();
            let cyclic = members.len() > 1
                || members
                    .iter()
                    .any(|m| graph.out_tagged(*m, tags::CALL).any(|e| e.to == *m));
            if !cyclic {
                continue;
            }
            let internal: Vec<EdgeId> = members
                .iter()
                .flat_map(|m| graph.out_tagged(*m, tags::CALL))
                .filter(|e| members.contains(&e.to))
                .map(|e| e.id)
                .collect();
            let expensive: Vec<&crate::graph::EdgeRecord> = members
                .iter()
                .flat_map(|m| graph.out_tagged(*m, tags::CALL))
                .filter(|e| graph.node_has_tag(e.to, tags::EXPENSIVE))
                .collect();
            let targets: BTreeSet<NodeId> = expensive.iter().map(|e| e.to).collect();
            for target in targets {
                let names: Vec<String> = members.iter().map(|m| describe(graph, &hierarchy, *m)).collect();
                let mut anchors: Vec<ElementId> = members.iter().map(|m| ElementId::Node(*m)).collect();
                anchors.push(target.into());
                let calls: Vec<ElementId> = expensive
                    .iter()
                    .filter(|e| e.to == target)
                    .map(|e| ElementId::Edge(e.id))
                    .collect();
                findings.push(Finding {
                    message: format!(
                        "recursive cycle {{{}}} calls expensive `{}`",
                        names.join(", "),
                        describe(graph, &hierarchy, target)
                    ),
                    spans: spans_of(graph, &calls),
                    anchors,
                });
            }
            if !expensive.is_empty() {
                let edges = internal.into_iter().chain(expensive.iter().map(|e| e.id));
                sub = union(&sub, &Subgraph::from_parts(graph, [], edges));
            }
        }
        Envelope::new("availability", Category::Availability, sub, findings)
    }
}
