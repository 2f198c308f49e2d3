//! RTA on the hierarchy fixture family, checked against a naive fixpoint
//! that shares no code with the indexer.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use graphaudit::frontend::{parse_miniapp, parse_profile, SourceUnit};
use graphaudit::graph::tags::{self, attr};
use graphaudit::index::{resolve_entry_points, run_rta, IndexInputs, IndexPipeline, Schedule, WorklistOrder};
use graphaudit::{EdgeId, NodeId, ProgramGraph};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load(name: &str) -> (Arc<ProgramGraph>, BTreeSet<NodeId>) {
    let profile = parse_profile(&fs::read_to_string(fixtures().join("profile.json")).unwrap()).unwrap();
    let path = format!("rta/{name}.mapp");
    let text = fs::read_to_string(fixtures().join(&path)).unwrap();
    let builder = parse_miniapp(&[SourceUnit::new(&path, &text)], &profile).unwrap();
    let inputs = IndexInputs { profile: profile.clone(), ..IndexInputs::default() };
    let (graph, _) = IndexPipeline::builtin(&["xml-callbacks".to_owned(), "rta".to_owned()], 100)
        .unwrap()
        .run(builder, &inputs, Schedule::Canonical)
        .unwrap();
    let entries = resolve_entry_points(&graph, &profile).unwrap();
    (graph, entries)
}

fn names() -> Vec<String> {
    let mut out: Vec<String> = fs::read_dir(fixtures().join("rta"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    out.sort();
    out
}

fn supertype(g: &ProgramGraph, ty: NodeId) -> Option<NodeId> {
    g.out_tagged(ty, tags::EXTENDS).map(|e| e.to).next()
}

fn owner(g: &ProgramGraph, m: NodeId) -> Option<NodeId> {
    g.in_tagged(m, tags::DECLARES).map(|e| e.from).find(|t| g.node_has_tag(*t, tags::TYPE))
}

fn is_subtype(g: &ProgramGraph, mut sub: NodeId, sup: NodeId) -> bool {
    loop {
        if sub == sup {
            return true;
        }
        match supertype(g, sub) {
            Some(s) => sub = s,
            None => return false,
        }
    }
}

fn lookup(g: &ProgramGraph, mut ty: NodeId, name: &str, arity: i64) -> Option<NodeId> {
    loop {
        let found = g.out_tagged(ty, tags::DECLARES).map(|e| e.to).find(|m| {
            let n = g.node(*m).unwrap();
            n.has_tag(tags::METHOD) && n.name() == name && n.attr_int(attr::ARITY).unwrap_or(0) == arity
        });
        if found.is_some() {
            return found;
        }
        ty = supertype(g, ty)?;
    }
}

fn type_named(g: &ProgramGraph, name: &str) -> Option<NodeId> {
    g.nodes_tagged(tags::TYPE).find(|n| n.name() == name).map(|n| n.id)
}

/// (reachable, feasible) by recomputing everything until nothing changes.
fn oracle(g: &ProgramGraph, entries: &BTreeSet<NodeId>) -> (BTreeSet<NodeId>, BTreeSet<EdgeId>) {
    let mut reachable = entries.clone();
    let mut instantiated: BTreeSet<NodeId> = g
        .nodes_tagged(tags::TYPE)
        .filter(|n| n.has_tag(tags::STUB))
        .map(|n| n.id)
        .chain(entries.iter().filter_map(|m| owner(g, *m)))
        .collect();
    let mut feasible = BTreeSet::new();
    loop {
        let before = (reachable.len(), instantiated.len(), feasible.len());
        for m in reachable.clone() {
            instantiated.extend(g.out_tagged(m, tags::INSTANTIATES).map(|e| e.to));
            let sites = g
                .out_tagged(m, tags::DECLARES)
                .filter(|e| g.node_has_tag(e.to, tags::STATEMENT))
                .flat_map(|s| g.out_tagged(s.to, tags::DECLARES).map(|e| e.to))
                .filter(|n| g.node_has_tag(*n, tags::CALLSITE_RESULT));
            for cs in sites {
                let node = g.node(cs).unwrap();
                let (Some(recv), Some(callee)) = (node.attr_str(attr::RECEIVER_TYPE), node.attr_str(attr::CALLEE))
                else {
                    continue;
                };
                let Some(stat) = type_named(g, recv) else { continue };
                let arity = node.attr_int(attr::ARITY).unwrap_or(0);
                for c in instantiated.clone() {
                    if !is_subtype(g, c, stat) {
                        continue;
                    }
                    let Some(target) = lookup(g, c, callee, arity) else { continue };
                    for e in g.out_tagged(m, tags::CALL).filter(|e| e.to == target) {
                        feasible.insert(e.id);
                        reachable.insert(target);
                    }
                }
            }
        }
        if before == (reachable.len(), instantiated.len(), feasible.len()) {
            return (reachable, feasible);
        }
    }
}

fn method(g: &ProgramGraph, ty: &str, name: &str) -> NodeId {
    g.nodes_tagged(tags::METHOD)
        .find(|n| n.name() == name && n.attr_str(attr::DECLARING_TYPE) == Some(ty))
        .unwrap_or_else(|| panic!("{ty}.{name}"))
        .id
}

#[test]
fn rta_matches_oracle_on_every_fixture() {
    let all = names();
    assert_eq!(all.len(), 7);
    for name in all {
        let (g, entries) = load(&name);
        let (reachable, feasible) = oracle(&g, &entries);
        let tagged: BTreeSet<EdgeId> = g.edges_tagged(tags::RTA_FEASIBLE).map(|e| e.id).collect();
        let tagged_nodes: BTreeSet<NodeId> = g.nodes_tagged(tags::RTA_REACHABLE).map(|n| n.id).collect();
        assert_eq!(tagged, feasible, "{name}: feasible edges");
        assert_eq!(tagged_nodes, reachable, "{name}: reachable methods");
        // RTA never adds call edges, only narrows the CHA set.
        let cha: BTreeSet<EdgeId> = g.edges_tagged(tags::CALL).map(|e| e.id).collect();
        assert!(tagged.is_subset(&cha), "{name}");
    }
}

#[test]
fn rta_is_independent_of_worklist_order() {
    for name in names() {
        let (g, entries) = load(&name);
        let base = run_rta(&g, &entries, WorklistOrder::Fifo);
        assert_eq!(run_rta(&g, &entries, WorklistOrder::Lifo), base, "{name}");
        for seed in 0..10 {
            assert_eq!(run_rta(&g, &entries, WorklistOrder::Shuffled(seed)), base, "{name}/{seed}");
        }
    }
}

#[test]
fn rta_equals_cha_when_everything_is_instantiated() {
    let (g, _) = load("both-instantiated");
    let call = method(&g, "Main", "call");
    let cha: BTreeSet<EdgeId> = g.out_tagged(call, tags::CALL).map(|e| e.id).collect();
    let rta: BTreeSet<EdgeId> = g.out_tagged(call, tags::CALL).filter(|e| e.has_tag(tags::RTA_FEASIBLE)).map(|e| e.id).collect();
    assert_eq!(cha.len(), 2);
    assert_eq!(rta, cha);
}

fn feasible_into(g: &ProgramGraph, from: NodeId, to: NodeId) -> bool {
    g.out_tagged(from, tags::CALL).any(|e| e.to == to && e.has_tag(tags::RTA_FEASIBLE))
}

fn has_call(g: &ProgramGraph, from: NodeId, to: NodeId) -> bool {
    g.out_tagged(from, tags::CALL).any(|e| e.to == to)
}

#[test]
fn rta_expected_outcomes_per_fixture() {
    let (g, _) = load("single-override");
    let call = method(&g, "Main", "call");
    assert!(feasible_into(&g, call, method(&g, "A", "m")));
    assert!(has_call(&g, call, method(&g, "B", "m")));
    assert!(!feasible_into(&g, call, method(&g, "B", "m")));

    let (g, _) = load("deep-chain");
    let main = method(&g, "Main", "main");
    assert!(feasible_into(&g, main, method(&g, "A", "m")));
    assert!(!feasible_into(&g, main, method(&g, "C", "m")));

    let (g, _) = load("narrowing");
    let main = method(&g, "Main", "main");
    assert!(feasible_into(&g, main, method(&g, "B", "m")));
    assert!(feasible_into(&g, main, method(&g, "A", "m")));
    assert!(!feasible_into(&g, main, method(&g, "D", "m")));

    let (g, _) = load("siblings");
    let main = method(&g, "Main", "main");
    assert!(feasible_into(&g, main, method(&g, "Circle", "area")));
    for other in ["Shape", "Square", "Triangle"] {
        assert!(!feasible_into(&g, main, method(&g, other, "area")), "{other}");
    }

    let (g, _) = load("transitive");
    let main = method(&g, "Main", "main");
    assert!(feasible_into(&g, main, method(&g, "B", "m")));
    assert!(!feasible_into(&g, main, method(&g, "C", "m")));
    assert!(!g.node_has_tag(method(&g, "Factory", "never"), tags::RTA_REACHABLE));

    let (g, _) = load("nothing-instantiated");
    let main = method(&g, "Main", "main");
    assert!(feasible_into(&g, main, method(&g, "Main", "helper")));
    assert!(!feasible_into(&g, main, method(&g, "A", "m")));
}
