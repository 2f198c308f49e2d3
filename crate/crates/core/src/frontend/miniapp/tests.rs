use super::*;
use crate::graph::tags::{self, attr};
use crate::graph::ProgramGraph;
use crate::frontend::parse_profile;

fn build(src: &str) -> ProgramGraph {
    build_with(src, PlatformProfile::default())
}

fn build_with(src: &str, profile: PlatformProfile) -> ProgramGraph {
    let mut b = parse_miniapp(&[SourceUnit::new("app.mapp", src)], &profile).unwrap();
    b.freeze().as_ref().clone()
}

fn err(src: &str) -> FrontendError {
    parse_miniapp(&[SourceUnit::new("app.mapp", src)], &PlatformProfile::default()).unwrap_err()
}

fn method(g: &ProgramGraph, ty: &str, name: &str) -> crate::NodeId {
    g.nodes_tagged(tags::METHOD)
        .find(|n| n.name() == name && n.attr_str(attr::DECLARING_TYPE) == Some(ty))
        .unwrap_or_else(|| panic!("{ty}.{name}"))
        .id
}

fn var(g: &ProgramGraph, name: &str) -> crate::NodeId {
    g.nodes_tagged(tags::VARIABLE).find(|n| n.name() == name).unwrap().id
}

fn has_edge(g: &ProgramGraph, kind: &str, from: crate::NodeId, to: crate::NodeId) -> bool {
    g.out_tagged(from, kind).any(|e| e.to == to)
}

#[test]
fn overrides_point_to_overridden() {
    let g = build("class A { void m() { } } class B extends A { void m() { } }");
    let (a, b) = (method(&g, "A", "m"), method(&g, "B", "m"));
    assert!(has_edge(&g, tags::OVERRIDES, b, a));
    assert!(!has_edge(&g, tags::OVERRIDES, a, b));
    assert_eq!(g.edges_tagged(tags::EXTENDS).count(), 1);
}

#[test]
fn overrides_require_same_arity() {
    let g = build("class A { void m(int x) { } } class B extends A { void m() { } }");
    assert_eq!(g.edges_tagged(tags::OVERRIDES).count(), 0);
}

#[test]
fn cha_calls_reach_every_override() {
    let g = build(
        "class A { void m() { } }
         class B extends A { void m() { } }
         class C { void run(A x) { x.m(); } }",
    );
    let run = method(&g, "C", "run");
    assert!(has_edge(&g, tags::CALL, run, method(&g, "A", "m")));
    assert!(has_edge(&g, tags::CALL, run, method(&g, "B", "m")));
    let call = g.out_tagged(run, tags::CALL).next().unwrap();
    assert_eq!(call.attrs.get(attr::SPAN_PATH).and_then(|v| v.as_str()), Some("app.mapp"));
}

#[test]
fn inherited_method_is_a_target_for_subclass_receivers() {
    let g = build(
        "class A { void m() { } }
         class B extends A { }
         class C { void run(B x) { x.m(); } }",
    );
    assert!(has_edge(&g, tags::CALL, method(&g, "C", "run"), method(&g, "A", "m")));
}

#[test]
fn assignment_flows_rhs_to_lhs() {
    let g = build("class A { void f(int x) { int y = 0; y = x; } }");
    assert!(has_edge(&g, tags::DATA_FLOW, var(&g, "x"), var(&g, "y")));
}

#[test]
fn arguments_and_returns_flow_interprocedurally() {
    let g = build(
        "class A {
           int id(int v) { return v; }
           void f(int x) { int y = id(x); }
         }",
    );
    assert!(has_edge(&g, tags::DATA_FLOW, var(&g, "x"), var(&g, "v")));
    let result = g.nodes_tagged(tags::CALLSITE_RESULT).next().unwrap().id;
    assert!(has_edge(&g, tags::DATA_FLOW, var(&g, "v"), result));
    assert!(has_edge(&g, tags::DATA_FLOW, result, var(&g, "y")));
}

#[test]
fn field_writes_and_reads_go_through_the_field_node() {
    let g = build(
        "class A { int f;
           void set(int x) { f = x; }
           int get() { int y = this.f; return y; } }",
    );
    let field = g.nodes_tagged(tags::FIELD).next().unwrap().id;
    assert!(has_edge(&g, tags::DATA_FLOW, var(&g, "x"), field));
    assert!(has_edge(&g, tags::DATA_FLOW, field, var(&g, "y")));
}

#[test]
fn instantiation_edge() {
    let g = build("class A { } class B { void f() { A a = new A(); } }");
    let a = g.nodes_tagged(tags::TYPE).find(|n| n.name() == "A").unwrap().id;
    assert!(has_edge(&g, tags::INSTANTIATES, method(&g, "B", "f"), a));
}

#[test]
fn control_flow_covers_branches_and_loops() {
    let g = build(
        "class A { void g() { }
           void f(boolean c) { if (c) { g(); } else { g(); } while (c) { g(); } return; } }",
    );
    let f = method(&g, "A", "f");
    let stmts: Vec<_> = g
        .out_tagged(f, tags::DECLARES)
        .map(|e| g.node(e.to).unwrap())
        .filter(|n| n.has_tag(tags::STATEMENT))
        .collect();
    let by_kind = |k: &str| stmts.iter().filter(|n| n.attr_str(attr::STATEMENT_KIND) == Some(k)).count();
    assert_eq!(by_kind("if"), 1);
    assert_eq!(by_kind("while"), 1);
    assert_eq!(by_kind("call"), 3);
    let w = stmts.iter().find(|n| n.name() == "while").unwrap().id;
    // Both branch ends join at the loop header, and the loop body returns to it.
    assert_eq!(g.in_tagged(w, tags::CONTROL_FLOW).count(), 3);
    let ret = stmts.iter().find(|n| n.name() == "return").unwrap().id;
    assert!(has_edge(&g, tags::CONTROL_FLOW, w, ret));
    assert_eq!(g.out_tagged(ret, tags::CONTROL_FLOW).count(), 0);
}

#[test]
fn stub_receivers_flow_through_calls() {
    let profile = parse_profile(
        r#"{"stubs":[{"type":"String","methods":[{"name":"trim","returns":"String"}]}],
            "tags":{"String.trim":["SOURCE"]}}"#,
    )
    .unwrap();
    let g = build_with("class A { void f(String s) { String t = s.trim(); } }", profile);
    let result = g.nodes_tagged(tags::CALLSITE_RESULT).next().unwrap().id;
    assert!(has_edge(&g, tags::DATA_FLOW, var(&g, "s"), result));
    let trim = g.nodes_tagged(tags::METHOD).find(|n| n.name() == "trim").unwrap();
    assert!(trim.has_tag(tags::STUB) && trim.has_tag(tags::SOURCE));
    assert!(trim.span.is_none());
}

#[test]
fn errors_are_positioned() {
    match err("class A {\n  void f() { x = 1; }\n}") {
        FrontendError::Unresolved { at, name, .. } => {
            assert_eq!(name, "x");
            assert_eq!((at.line, at.column), (2, 14));
        }
        other => panic!("{other:?}"),
    }
    match err("class A {\n  void f() { 1 + ; }\n}") {
        FrontendError::Syntax { at, .. } => assert_eq!(at.line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn inheritance_cycles_and_duplicates() {
    assert!(matches!(
        err("class A extends B { } class B extends A { }"),
        FrontendError::InheritanceCycle(_)
    ));
    assert!(matches!(err("class A extends A { }"), FrontendError::InheritanceCycle(_)));
    assert!(matches!(err("class A { } class A { }"), FrontendError::Duplicate { .. }));
    assert!(matches!(err("class A { void m() { } void m() { } }"), FrontendError::Duplicate { .. }));
    assert!(matches!(err("class A extends Nope { }"), FrontendError::Unresolved { .. }));
}

#[test]
fn deep_nesting_is_rejected_not_overflowed() {
    let deep = format!("class A {{ int f() {{ return {}1{}; }} }}", "(".repeat(5000), ")".repeat(5000));
    assert!(matches!(err(&deep), FrontendError::Syntax { .. }));
    let chain = format!("class A {{ int f() {{ return 1{}; }} }}", " + 1".repeat(5000));
    assert!(matches!(err(&chain), FrontendError::Syntax { .. }));
}

#[test]
fn identical_input_identical_graph() {
    let src = "class A { void m() { } } class B extends A { void m() { m(); } }";
    assert_eq!(build(src), build(src));
}
