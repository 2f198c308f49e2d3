//! Rapid type analysis over CALL edges.
//!
//! Starting from the entry points, a method is reachable once some
//! feasible CALL edge leads to it. A CALL edge from a reachable caller to
//! `M` is feasible when some instantiated type `C` dispatches to `M`: `C`
//! is the static receiver type of a call site in the caller (or one of its
//! subtypes) and looking the call up from `C` resolves to `M`.
//!
//! The instantiated set holds INSTANTIATES targets of reachable methods,
//! plus every platform stub type and the declaring types of the entry
//! points, since the platform creates those objects itself.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::IndexError;
use crate::frontend::PlatformProfile;
use crate::graph::tags::{self, attr};
use crate::graph::{EdgeId, NodeId, ProgramGraph};
use crate::hierarchy::Hierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WorklistOrder {
    #[default]
    Fifo,
    Lifo,
    /// Pops a uniformly random pending method each step.
    Shuffled(u64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RtaResult {
    pub entry_points: BTreeSet<NodeId>,
    pub reachable: BTreeSet<NodeId>,
    pub instantiated: BTreeSet<NodeId>,
    pub feasible: BTreeSet<EdgeId>,
}

/// Entry points named by the profile plus methods tagged XML_HANDLER.
/// Qualified names (`Type.method`) must resolve; bare names select every
/// app method with that name.
pub fn resolve_entry_points(graph: &ProgramGraph, profile: &PlatformProfile) -> Result<BTreeSet<NodeId>, IndexError> {
    let hierarchy = Hierarchy::build(graph);
    let mut out = BTreeSet::new();
    for entry in &profile.entry_points {
        match entry.split_once('.') {
            Some((ty, m)) => {
                let found: Vec<NodeId> = hierarchy
                    .type_named(ty)
                    .map(|t| {
                        hierarchy
                            .declared_methods(t)
                            .iter()
                            .copied()
                            .filter(|id| graph.name(*id) == m)
                            .collect()
                    })
                    .unwrap_or_default();
                if found.is_empty() {
                    return Err(IndexError::MissingEntryPoint(entry.clone()));
                }
                out.extend(found);
            }
            None => out.extend(
                graph
                    .nodes_tagged(tags::METHOD)
                    .filter(|n| n.name() == entry && !n.has_tag(tags::STUB))
                    .map(|n| n.id),
            ),
        }
    }
    out.extend(graph.nodes_tagged(tags::XML_HANDLER).map(|n| n.id));
    if out.is_empty() {
        return Err(IndexError::NoEntryPoints);
    }
    Ok(out)
}

/// Call sites of each method: CALLSITE_RESULT nodes under its statements.
fn callsites_by_method(graph: &ProgramGraph) -> BTreeMap<NodeId, Vec<NodeId>> {
    let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for method in graph.nodes_tagged(tags::METHOD) {
        for d in graph.out_tagged(method.id, tags::DECLARES) {
            if !graph.node_has_tag(d.to, tags::STATEMENT) {
                continue;
            }
            for c in graph.out_tagged(d.to, tags::DECLARES) {
                if graph.node_has_tag(c.to, tags::CALLSITE_RESULT) {
                    out.entry(method.id).or_default().push(c.to);
                }
            }
        }
    }
    out
}

struct Dispatch<'g> {
    graph: &'g ProgramGraph,
    hierarchy: Hierarchy,
    /// Per CALL edge: (static type, name, arity) of each call site that
    /// could produce it.
    sites: BTreeMap<EdgeId, Vec<(NodeId, String, usize)>>,
}

impl Dispatch<'_> {
    fn feasible(&self, edge: EdgeId, instantiated: &BTreeSet<NodeId>) -> bool {
        let e = self.graph.edge(edge).expect("edge exists");
        let target = e.to;
        let resolves = |c: NodeId, name: &str, arity: usize| {
            self.hierarchy.lookup_method(self.graph, c, name, arity) == Some(target)
        };
        match self.sites.get(&edge) {
            Some(sites) => sites.iter().any(|(static_type, name, arity)| {
                instantiated
                    .iter()
                    .any(|c| self.hierarchy.is_subtype(*c, *static_type) && resolves(*c, name, *arity))
            }),
            // Without call-site records, dispatch from the target's owner.
            None => {
                let node = self.graph.node(target).expect("target exists");
                let arity = node.attr_int(attr::ARITY).unwrap_or(0).max(0) as usize;
                match self.hierarchy.owner(target) {
                    Some(owner) => instantiated
                        .iter()
                        .any(|c| self.hierarchy.is_subtype(*c, owner) && resolves(*c, node.name(), arity)),
                    None => true,
                }
            }
        }
    }
}

pub fn run_rta(graph: &ProgramGraph, entry_points: &BTreeSet<NodeId>, order: WorklistOrder) -> RtaResult {
    let hierarchy = Hierarchy::build(graph);
    let mut sites: BTreeMap<EdgeId, Vec<(NodeId, String, usize)>> = BTreeMap::new();
    for (method, callsites) in callsites_by_method(graph) {
        for cs in callsites {
            let node = graph.node(cs).expect("callsite exists");
            let (Some(recv), Some(callee)) = (node.attr_str(attr::RECEIVER_TYPE), node.attr_str(attr::CALLEE)) else {
                continue;
            };
            let Some(static_type) = hierarchy.type_named(recv) else { continue };
            let arity = node.attr_int(attr::ARITY).unwrap_or(0).max(0) as usize;
            let targets = hierarchy.dispatch_targets(graph, static_type, callee, arity);
            for e in graph.out_tagged(method, tags::CALL) {
                if targets.contains(&e.to) {
                    sites
                        .entry(e.id)
                        .or_default()
                        .push((static_type, callee.to_owned(), arity));
                }
            }
        }
    }
    let dispatch = Dispatch { graph, hierarchy, sites };

    let mut instantiated: BTreeSet<NodeId> = graph
        .nodes_tagged(tags::STUB)
        .filter(|n| n.has_tag(tags::TYPE))
        .map(|n| n.id)
        .collect();
    instantiated.extend(entry_points.iter().filter_map(|m| dispatch.hierarchy.owner(*m)));

    let mut rng = match order {
        WorklistOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut reachable: BTreeSet<NodeId> = BTreeSet::new();
    let mut worklist: VecDeque<NodeId> = entry_points.iter().copied().collect();
    if let Some(rng) = rng.as_mut() {
        worklist.make_contiguous().shuffle(rng);
    }
    let mut feasible = BTreeSet::new();
    // CALL edges out of reachable methods not yet shown feasible.
    let mut pending: Vec<EdgeId> = Vec::new();

    loop {
        let next = match order {
            WorklistOrder::Fifo => worklist.pop_front(),
            WorklistOrder::Lifo => worklist.pop_back(),
            WorklistOrder::Shuffled(_) => {
                if worklist.is_empty() {
                    None
                } else {
                    let i = rand::Rng::random_range(rng.as_mut().expect("seeded"), 0..worklist.len());
                    worklist.swap_remove_back(i)
                }
            }
        };
        let Some(method) = next else { break };
        if !reachable.insert(method) {
            continue;
        }
        instantiated.extend(graph.out_tagged(method, tags::INSTANTIATES).map(|e| e.to));
        pending.extend(graph.out_tagged(method, tags::CALL).map(|e| e.id));
        // The instantiated set only grows here, so re-checking every pending
        // edge after each step reaches the fixpoint.
        let mut still = Vec::with_capacity(pending.len());
        for edge in pending.drain(..) {
            if dispatch.feasible(edge, &instantiated) {
                feasible.insert(edge);
                let to = graph.edge(edge).expect("edge exists").to;
                if !reachable.contains(&to) {
                    worklist.push_back(to);
                }
            } else {
                still.push(edge);
            }
        }
        pending = still;
    }

    RtaResult {
        entry_points: entry_points.clone(),
        reachable,
        instantiated,
        feasible,
    }
}
