//! Query-algebra properties on random graphs, checked against a
//! brute-force reachability oracle.

use std::collections::BTreeSet;
use std::sync::Arc;

use graphaudit::graph::tags;
use graphaudit::{attrs, EdgeId, GraphBuilder, NodeId, ProgramGraph, Subgraph};
use proptest::prelude::*;

const EDGE_KINDS: [&str; 3] = [tags::CALL, tags::DATA_FLOW, tags::DECLARES];

#[derive(Debug, Clone)]
struct Shape {
    nodes: usize,
    edges: Vec<(usize, usize, usize)>,
    marked: Vec<bool>,
}

fn shape() -> impl Strategy<Value = Shape> {
    (1usize..=30).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n, 0..EDGE_KINDS.len()), 0..=60),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(nodes, edges, marked)| Shape { nodes, edges, marked })
    })
}

fn build(shape: &Shape) -> Arc<ProgramGraph> {
    let mut b = GraphBuilder::new();
    let ids: Vec<NodeId> = (0..shape.nodes)
        .map(|i| b.add_node(tags::METHOD, &format!("m{i}"), attrs!()).unwrap())
        .collect();
    for (i, m) in shape.marked.iter().enumerate() {
        if *m {
            b.tag_node(ids[i], tags::SOURCE).unwrap();
        }
    }
    for (from, to, kind) in &shape.edges {
        b.add_edge(EDGE_KINDS[*kind], ids[*from], ids[*to], attrs!()).unwrap();
    }
    b.freeze()
}

/// Picks a subgraph by bit masks; edges bring their endpoints.
fn pick(g: &Arc<ProgramGraph>, node_mask: u64, edge_mask: u64) -> Subgraph {
    let nodes = g.node_ids().enumerate().filter(|(i, _)| node_mask >> (i % 64) & 1 == 1).map(|(_, n)| n);
    let edges = g.edge_ids().enumerate().filter(|(i, _)| edge_mask >> (i % 64) & 1 == 1).map(|(_, e)| e);
    Subgraph::from_parts(g, nodes, edges)
}

/// Nodes reachable from `origin` over `relation`, and the relation edges
/// leaving them, by naive iteration to a fixpoint.
fn oracle_reach(
    g: &ProgramGraph,
    relation: &Subgraph,
    origin: &BTreeSet<NodeId>,
    reverse: bool,
    limit: Option<usize>,
) -> (BTreeSet<NodeId>, BTreeSet<EdgeId>) {
    let ends = |e: EdgeId| {
        let r = g.edge(e).unwrap();
        if reverse {
            (r.to, r.from)
        } else {
            (r.from, r.to)
        }
    };
    let mut reached = origin.clone();
    let mut frontier = origin.clone();
    let mut edges = BTreeSet::new();
    let mut round = 0;
    while !frontier.is_empty() && limit.is_none_or(|l| round < l) {
        let mut next = BTreeSet::new();
        for e in relation.edges() {
            let (a, b) = ends(*e);
            if frontier.contains(&a) {
                edges.insert(*e);
                if !reached.contains(&b) {
                    next.insert(b);
                }
            }
        }
        reached.extend(next.iter().copied());
        frontier = next;
        round += 1;
    }
    (reached, edges)
}

/// Path-based definition of `between`.
fn oracle_between(
    g: &ProgramGraph,
    relation: &Subgraph,
    from: &BTreeSet<NodeId>,
    to: &BTreeSet<NodeId>,
) -> (BTreeSet<NodeId>, BTreeSet<EdgeId>) {
    let (fwd, _) = oracle_reach(g, relation, from, false, None);
    let (bwd, _) = oracle_reach(g, relation, to, true, None);
    let nodes: BTreeSet<NodeId> = fwd.intersection(&bwd).copied().collect();
    let edges = relation
        .edges()
        .iter()
        .copied()
        .filter(|e| {
            let r = g.edge(*e).unwrap();
            fwd.contains(&r.from) && bwd.contains(&r.to)
        })
        .collect();
    (nodes, edges)
}

fn parts(s: &Subgraph) -> (BTreeSet<NodeId>, BTreeSet<EdgeId>) {
    (s.nodes().clone(), s.edges().clone())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn traversals_match_oracle(s in shape(), qn: u64, qe: u64, on: u64, tn: u64, steps in 1usize..4) {
        let g = build(&s);
        let q = pick(&g, qn, qe);
        let origin = Subgraph::from_nodes(&g, pick(&g, on, 0).nodes().iter().copied());
        let target = Subgraph::from_nodes(&g, pick(&g, tn, 0).nodes().iter().copied());
        prop_assert_eq!(parts(&q.forward(&origin)), oracle_reach(&g, &q, origin.nodes(), false, None));
        prop_assert_eq!(parts(&q.reverse(&origin)), oracle_reach(&g, &q, origin.nodes(), true, None));
        prop_assert_eq!(parts(&q.forward_steps(&origin, steps)), oracle_reach(&g, &q, origin.nodes(), false, Some(steps)));
        prop_assert_eq!(parts(&q.reverse_step(&origin)), oracle_reach(&g, &q, origin.nodes(), true, Some(1)));
        prop_assert_eq!(parts(&q.between(&origin, &target)), oracle_between(&g, &q, origin.nodes(), target.nodes()));
        for r in [q.forward(&origin), q.reverse(&origin), q.between(&origin, &target)] {
            prop_assert!(r.is_endpoint_closed());
        }
    }

    #[test]
    fn lattice_laws(s in shape(), masks in prop::array::uniform6(any::<u64>())) {
        let g = build(&s);
        let a = pick(&g, masks[0], masks[1]);
        let b = pick(&g, masks[2], masks[3]);
        let c = pick(&g, masks[4], masks[5]);
        let empty = Subgraph::empty(&g);
        let universe = Subgraph::universe(&g);
        let u = |x: &Subgraph, y: &Subgraph| x.union(y).unwrap();
        let i = |x: &Subgraph, y: &Subgraph| x.intersection(y).unwrap();

        prop_assert_eq!(u(&a, &b), u(&b, &a));
        prop_assert_eq!(i(&a, &b), i(&b, &a));
        prop_assert_eq!(u(&u(&a, &b), &c), u(&a, &u(&b, &c)));
        prop_assert_eq!(i(&i(&a, &b), &c), i(&a, &i(&b, &c)));
        prop_assert_eq!(u(&a, &a), a.clone());
        prop_assert_eq!(i(&a, &a), a.clone());
        prop_assert_eq!(u(&a, &empty), a.clone());
        prop_assert_eq!(i(&a, &universe), a.clone());
        prop_assert_eq!(u(&a, &i(&a, &b)), a.clone());
        prop_assert_eq!(i(&a, &u(&a, &b)), a.clone());
        let d = a.difference(&b).unwrap();
        prop_assert!(d.is_endpoint_closed());
        prop_assert!(i(&d, &b).edges().is_empty());
    }

    #[test]
    fn filters_and_monotonicity(s in shape(), qn: u64, qe: u64, on: u64, extra: u64) {
        let g = build(&s);
        let q = pick(&g, qn, qe);
        let small = pick(&g, on, 0);
        let big = small.union(&pick(&g, extra, 0)).unwrap();
        prop_assert!(q.forward(&big).is_superset(&q.forward(&small)));
        prop_assert!(q.reverse(&big).is_superset(&q.reverse(&small)));
        prop_assert!(q.forward(&small).is_superset(&q.forward_step(&small)));
        let calls = q.edges_tagged_any([tags::CALL]);
        prop_assert!(calls.edges().iter().all(|e| g.edge(*e).unwrap().has_tag(tags::CALL)));
        prop_assert_eq!(calls.nodes(), q.nodes());
        let marked = q.nodes_tagged_any([tags::SOURCE]);
        prop_assert!(marked.is_endpoint_closed());
        prop_assert!(marked.nodes().iter().all(|n| g.node_has_tag(*n, tags::SOURCE)));
        let kept = q.retain_edges();
        prop_assert_eq!(kept.edges(), q.edges());
        let touched = kept.nodes().iter().all(|n| q.edges().iter().any(|e| {
            let r = g.edge(*e).unwrap();
            r.from == *n || r.to == *n
        }));
        prop_assert!(touched);
    }
}
