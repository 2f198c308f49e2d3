use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use super::*;
use crate::analyze::{
    AnalysisContext, Analyzer, AnalyzerDescriptor, Category, Envelope, Finding, Registry,
};
use crate::graph::tags;
use crate::graph::{ElementId, NodeId, ProgramGraph};
use crate::index::Schedule;
use crate::query::Subgraph;
use crate::testutil::{app, app_inputs};

/// Test analyzer: sleeps, then reports the first node of the graph.
struct Probe {
    name: &'static str,
    deps: &'static [&'static str],
    sleep_ms: u64,
    fail: bool,
}

impl Analyzer for Probe {
    fn descriptor(&self) -> AnalyzerDescriptor {
        AnalyzerDescriptor {
            name: self.name.into(),
            category: Category::Property,
            description: String::new(),
            assumptions: String::new(),
            dependencies: self.deps.iter().map(|d| (*d).to_owned()).collect(),
            continuations: Vec::new(),
        }
    }

    fn analyze(&self, ctx: &AnalysisContext) -> Envelope {
        std::thread::sleep(Duration::from_millis(self.sleep_ms));
        if self.fail {
            panic!("probe failure");
        }
        let first = ctx.graph.node_ids().next().unwrap();
        let f = Finding::new(&ctx.graph, self.name, vec![first.into()]);
        Envelope::new(self.name, Category::Property, Subgraph::empty(&ctx.graph), vec![f])
    }
}

fn probes(list: Vec<Probe>) -> Registry {
    let mut r = Registry::empty();
    for p in list {
        r.register(Arc::new(p)).unwrap();
    }
    r
}

fn probe(name: &'static str, deps: &'static [&'static str], sleep_ms: u64) -> Probe {
    Probe {
        name,
        deps,
        sleep_ms,
        fail: false,
    }
}

fn all() -> Vec<String> {
    Vec::new()
}

#[test]
fn dependents_start_after_dependencies_finish() {
    let ctx = app("benign-notes").context;
    let registry = probes(vec![
        probe("a", &[], 30),
        probe("b", &["a"], 1),
        probe("c", &["b", "a"], 1),
        probe("d", &[], 5),
    ]);
    for seed in 0..5 {
        let out = schedule_and_run(&registry, &all(), &ctx, Schedule::Randomized(seed)).unwrap();
        let rec = |n: &str| out.log.iter().find(|r| r.analyzer == n).unwrap().clone();
        assert!(rec("b").start_us >= rec("a").end_us);
        assert!(rec("c").start_us >= rec("b").end_us);
        let names: Vec<&str> = out.log.iter().map(|r| r.analyzer.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "d"]);
    }
}

#[test]
fn work_items_follow_name_order_not_completion_order() {
    let ctx = app("benign-notes").context;
    let registry = probes(vec![probe("slow", &[], 40), probe("fast", &[], 0)]);
    let out = schedule_and_run(&registry, &all(), &ctx, Schedule::Canonical).unwrap();
    let fast = out.log.iter().find(|r| r.analyzer == "fast").unwrap();
    let slow = out.log.iter().find(|r| r.analyzer == "slow").unwrap();
    assert!(fast.end_us <= slow.end_us);
    let state = AuditState::from_run("x", &ctx.graph, &out);
    let ids: Vec<(&str, &str)> = state.work_items.iter().map(|w| (w.id.as_str(), w.analyzer.as_str())).collect();
    assert_eq!(ids, [("w1", "fast"), ("w2", "slow")]);
}

#[test]
fn failures_are_isolated() {
    let ctx = app("benign-notes").context;
    let mut bad = probe("bad", &[], 0);
    bad.fail = true;
    let registry = probes(vec![bad, probe("after", &["bad"], 0), probe("ok", &[], 0), probe("needs", &["ghost"], 0)]);
    let out = schedule_and_run(&registry, &all(), &ctx, Schedule::Canonical).unwrap();
    let status = |n: &str| out.log.iter().find(|r| r.analyzer == n).unwrap().status;
    assert_eq!(status("bad"), RunStatus::Failed);
    assert_eq!(status("after"), RunStatus::Failed);
    assert_eq!(status("ok"), RunStatus::Findings);
    assert_eq!(status("needs"), RunStatus::Failed);
    assert!(out.log.iter().find(|r| r.analyzer == "needs").unwrap().error.as_ref().unwrap().contains("ghost"));
    assert_eq!(out.envelopes.keys().collect::<Vec<_>>(), ["ok"]);
}

#[test]
fn cycles_and_unknown_names_are_errors() {
    let ctx = app("benign-notes").context;
    let registry = probes(vec![probe("a", &["b"], 0), probe("b", &["a"], 0), probe("c", &[], 0)]);
    assert!(matches!(
        schedule_and_run(&registry, &all(), &ctx, Schedule::Canonical),
        Err(AuditError::DependencyCycle(c)) if c.len() == 3
    ));
    assert!(matches!(
        schedule_and_run(&registry, &["zzz".to_owned()], &ctx, Schedule::Canonical),
        Err(AuditError::Analyzer(_))
    ));
    // Requesting only `c` never touches the cycle.
    let out = schedule_and_run(&registry, &["c".to_owned()], &ctx, Schedule::Canonical).unwrap();
    assert_eq!(out.log.len(), 1);
}

fn full_run(name: &str, schedule: Schedule) -> (Ingested, RunOutcome, AuditState) {
    let ingested = ingest(&app_inputs(name), schedule).unwrap();
    let out = schedule_and_run(&Registry::builtin(), &all(), &ingested.context, schedule).unwrap();
    let state = AuditState::from_run(name, &ingested.graph, &out);
    (ingested, out, state)
}

#[test]
fn smsblocker_full_run_items() {
    let (_, _, state) = full_run("smsblocker", Schedule::Canonical);
    let analyzers: Vec<&str> = state.work_items.iter().map(|w| w.analyzer.as_str()).collect();
    assert_eq!(analyzers, ["broadcast-blockers", "permission-usage"]);
}

#[test]
fn filters_and_review() {
    let (_, _, mut state) = full_run("toolbox", Schedule::Canonical);
    let smell = state.list(&WorkItemFilter {
        category: Some(Category::Smell),
        reviewed: None,
    });
    assert_eq!(smell.len(), 1);
    assert_eq!(smell[0].analyzer, "reflection");
    let id = smell[0].id.clone();
    state.mark_reviewed(&id, true).unwrap();
    let open = state.list(&WorkItemFilter {
        category: None,
        reviewed: Some(false),
    });
    assert!(open.iter().all(|w| w.id != id));
    assert_eq!(open.len(), 2);
    state.set_notes(&id, "needed for plugin loading").unwrap();
    state.rename(&id, "plugin loader").unwrap();
    state.recolor(&id, "#ffaa00").unwrap();
    let item = state.get(&id).unwrap();
    assert_eq!((item.name.as_str(), item.color.as_str()), ("plugin loader", "#ffaa00"));
    assert_eq!(state.journal.len(), 4);
    assert!(matches!(state.mark_reviewed("w99", true), Err(AuditError::UnknownWorkItem(_))));
}

#[test]
fn artifact_overrides_repair_closure() {
    let (ingested, _, mut state) = full_run("smsblocker", Schedule::Canonical);
    let g = &ingested.graph;
    let item = state.work_items[0].clone();
    let before = item.effective(g);
    assert!(!before.edges().is_empty());
    let edge = *before.edges().iter().next().unwrap();
    let victim = g.edge(edge).unwrap().to;
    state.remove_artifacts(g, &item.id, &[victim.into()]).unwrap();
    let after = state.get(&item.id).unwrap().effective(g);
    assert!(!after.contains_node(victim));
    assert!(!after.contains_edge(edge));
    assert!(after.is_endpoint_closed());

    // Adding an edge brings its endpoints; re-adding the node restores it.
    let extra = g.edge_ids().find(|e| !before.contains_edge(*e)).unwrap();
    state.add_artifacts(g, &item.id, &[extra.into(), victim.into()]).unwrap();
    let again = state.get(&item.id).unwrap().effective(g);
    assert!(again.contains_edge(extra) && again.contains_node(victim));
    assert!(again.is_endpoint_closed());

    let bogus: ElementId = "n999999".parse().unwrap();
    assert!(matches!(
        state.add_artifacts(g, &item.id, &[bogus]),
        Err(AuditError::UnknownArtifact(_))
    ));
}

#[test]
fn state_round_trips_and_rejects_other_graphs() {
    let (ingested, _, mut state) = full_run("toolbox", Schedule::Canonical);
    let g = &ingested.graph;
    let id = state.work_items[0].id.clone();
    state.mark_reviewed(&id, true).unwrap();
    state.set_notes(&id, "ok \"quoted\"").unwrap();
    let first_node = g.node_ids().next().unwrap();
    state.add_artifacts(g, &id, &[first_node.into()]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    state.save(&path).unwrap();
    let back = AuditState::load(&path, g).unwrap();
    assert_eq!(back, state);

    let other = app("native-lib").graph;
    assert!(matches!(AuditState::load(&path, &other), Err(AuditError::HashMismatch { .. })));

    let mut value: serde_json::Value = serde_json::from_str(&state.to_json()).unwrap();
    value["workItems"][0]["owner"] = "mallory".into();
    match AuditState::from_json(&value.to_string(), g) {
        Err(AuditError::Schema { path, message }) => {
            assert_eq!(path, "workItems[0].owner");
            assert!(message.contains("owner"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn reports_are_identical_across_schedules() {
    for name in ["smsblocker", "toolbox", "xml-trip", "avail-recursion"] {
        let render = |schedule| {
            let (ingested, out, state) = full_run(name, schedule);
            AuditReport::new(&Registry::builtin(), &state, &out, &ingested.warnings).to_json()
        };
        let base = render(Schedule::Canonical);
        for seed in 0..3 {
            assert_eq!(render(Schedule::Randomized(seed)), base, "{name}");
        }
    }
}

#[test]
fn text_report_orders_by_severity() {
    let (ingested, out, state) = full_run("toolbox", Schedule::Canonical);
    let report = AuditReport::new(&Registry::builtin(), &state, &out, &ingested.warnings);
    let text = render_text(&report);
    let smell = text.find("[SMELL]").unwrap();
    let property = text.find("[PROPERTY]").unwrap();
    assert!(smell < property);
    assert!(text.contains("satisfied: "));
}

fn node_named(g: &ProgramGraph, tag: &str, name: &str) -> NodeId {
    g.nodes_tagged(tag).find(|n| n.name() == name).unwrap().id
}

#[test]
fn reverse_data_into_xml_reaches_the_layout_element() {
    let ingested = app("xml-trip");
    let g = &ingested.graph;
    let field = node_named(g, tags::FIELD, "destination");
    let view = smart_view(g, &SmartViewRequest::new(vec![field], SmartViewKind::ReverseDataIntoXml)).unwrap();
    let element = node_named(g, tags::XML_ELEMENT, "destinationField");
    assert!(view.contains_node(element));
    assert!(view.contains_node(node_named(g, tags::XML_ELEMENT, "root")));
    // Plain reverse data flow also finds the element, but not its parent.
    let data = smart_view(g, &SmartViewRequest::new(vec![field], SmartViewKind::ReverseData)).unwrap();
    assert!(data.contains_node(element));
    assert!(!data.contains_node(node_named(g, tags::XML_ELEMENT, "root")));
}

#[test]
fn one_step_equals_reverse_step() {
    let ingested = app("conf-field-relay");
    let g = &ingested.graph;
    let universe = Subgraph::universe(g);
    let flows = universe.edges_tagged_any([tags::DATA_FLOW]);
    for n in g.node_ids() {
        let mut req = SmartViewRequest::new(vec![n], SmartViewKind::ReverseData);
        req.steps = Steps::Count(1);
        let origin = Subgraph::from_nodes(g, [n]);
        assert_eq!(smart_view(g, &req).unwrap(), flows.reverse_step(&origin));
    }
}

#[test]
fn reverse_data_matches_bfs() {
    let ingested = app("integ-tainted-write");
    let g = &ingested.graph;
    for n in g.node_ids() {
        let view = smart_view(g, &SmartViewRequest::new(vec![n], SmartViewKind::ReverseData)).unwrap();
        let mut seen = BTreeSet::from([n]);
        let mut queue = VecDeque::from([n]);
        while let Some(x) = queue.pop_front() {
            for e in g.in_tagged(x, tags::DATA_FLOW) {
                if seen.insert(e.from) {
                    queue.push_back(e.from);
                }
            }
        }
        assert_eq!(view.nodes(), &seen);
    }
}

#[test]
fn smart_view_errors_and_other_kinds() {
    let ingested = app("xml-trip");
    let g = &ingested.graph;
    assert!(matches!(
        smart_view(g, &SmartViewRequest::new(vec![], SmartViewKind::ForwardCall)),
        Err(AuditError::EmptySelection)
    ));
    let ghost: NodeId = "n123456".parse().unwrap();
    assert!(matches!(
        smart_view(g, &SmartViewRequest::new(vec![ghost], SmartViewKind::ForwardCall)),
        Err(AuditError::UnknownNode(_))
    ));
    assert!(matches!("0".parse::<Steps>(), Err(AuditError::InvalidSteps(_))));
    assert_eq!("fixpoint".parse::<Steps>().unwrap(), Steps::Fixpoint);

    let handler = g.nodes_tagged(tags::XML_HANDLER).next().unwrap().id;
    let cb = smart_view(g, &SmartViewRequest::new(vec![handler], SmartViewKind::XmlCallbacks)).unwrap();
    assert!(cb.contains_node(node_named(g, tags::XML_ELEMENT, "destinationField")));
    let decl = smart_view(g, &SmartViewRequest::new(vec![handler], SmartViewKind::DeclarationStructure)).unwrap();
    assert!(decl.contains_node(node_named(g, tags::TYPE, "TripActivity")));
    let ty = node_named(g, tags::TYPE, "TripActivity");
    let hier = smart_view(g, &SmartViewRequest::new(vec![ty], SmartViewKind::TypeHierarchy)).unwrap();
    assert!(hier.contains_node(node_named(g, tags::TYPE, "Activity")));
    for kind in SmartViewKind::ALL {
        assert_eq!(kind.as_str().parse::<SmartViewKind>().unwrap(), kind);
    }
}
