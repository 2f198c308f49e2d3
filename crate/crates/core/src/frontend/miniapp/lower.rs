//! Lowering of parsed classes into graph content.
//!
//! Nodes are created in a fixed visit order (profile stubs, then units in
//! the order given, declarations before bodies) so identical inputs give
//! identical ids.
//!
//! Data flow is flow- and context-insensitive:
//! - assignment and initialisation: every value source of the right-hand
//!   side flows into the variable or field;
//! - calls: each argument's sources flow into the matching parameter of
//!   every class-hierarchy target, and the sources of each target's
//!   `return` expressions flow into the call-site result;
//! - calls to bodiless platform stubs also pass the receiver's sources to
//!   the call-site result;
//! - field reads use the FIELD node itself as the value source.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use crate::attrs;
use crate::frontend::{FrontendError, Location};
use crate::graph::tags::{self, attr};
use crate::graph::{EdgeId, GraphBuilder, NodeId, SourceSpan, Value};
use crate::hierarchy::Hierarchy;

const PRIMITIVES: &[&str] = &["void", "int", "boolean", "String"];

/// A class declaration with the file it came from.
pub struct Located<'a> {
    pub path: &'a str,
    pub text: &'a str,
    pub class: &'a ClassDecl,
}

impl Located<'_> {
    fn at(&self, offset: usize) -> Location {
        Location::in_text(self.path, self.text, offset)
    }

    fn span(&self, span: Span) -> Option<SourceSpan> {
        if self.class.stub {
            None
        } else {
            Some(SourceSpan {
                path: self.path.to_owned(),
                start: span.start,
                end: span.end,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Ty {
    Class(NodeId),
    Prim(String),
    Null,
}

struct CallSite {
    caller: NodeId,
    static_type: NodeId,
    name: String,
    arity: usize,
    result: NodeId,
    receiver: Vec<NodeId>,
    args: Vec<Vec<NodeId>>,
    span: Option<SourceSpan>,
}

struct Lowerer<'a> {
    builder: &'a mut GraphBuilder,
    hierarchy: Hierarchy,
    flows: BTreeSet<(NodeId, NodeId)>,
    calls: Vec<CallSite>,
    returns: BTreeMap<NodeId, Vec<NodeId>>,
}

pub fn lower(builder: &mut GraphBuilder, classes: &[Located<'_>]) -> Result<(), FrontendError> {
    let mut type_nodes: Vec<NodeId> = Vec::with_capacity(classes.len());
    let mut by_name: BTreeMap<&str, usize> = BTreeMap::new();

    for (idx, c) in classes.iter().enumerate() {
        let name = c.class.name.text.as_str();
        if by_name.insert(name, idx).is_some() || PRIMITIVES.contains(&name) && name != "String" {
            return Err(FrontendError::Duplicate {
                at: c.at(c.class.name.span.start),
                name: name.to_owned(),
            });
        }
        let id = builder.add_node_spanned(tags::TYPE, name, attrs!(), c.span(c.class.span))?;
        if c.class.stub {
            builder.tag_node(id, tags::STUB)?;
        }
        type_nodes.push(id);
    }

    // Supertypes and cycle check.
    let mut parent: Vec<Option<usize>> = vec![None; classes.len()];
    for (idx, c) in classes.iter().enumerate() {
        if let Some(sup) = &c.class.extends {
            let Some(&p) = by_name.get(sup.text.as_str()) else {
                return Err(FrontendError::Unresolved {
                    at: c.at(sup.span.start),
                    name: sup.text.clone(),
                    message: "unknown supertype".into(),
                });
            };
            parent[idx] = Some(p);
        }
    }
    for start in 0..classes.len() {
        let mut chain = vec![start];
        let mut cur = start;
        while let Some(p) = parent[cur] {
            if p == start {
                let mut names: Vec<String> = chain.iter().map(|i| classes[*i].class.name.text.clone()).collect();
                names.push(classes[start].class.name.text.clone());
                return Err(FrontendError::InheritanceCycle(names));
            }
            if chain.contains(&p) {
                break;
            }
            chain.push(p);
            cur = p;
        }
    }
    for (idx, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            builder.add_edge(tags::EXTENDS, type_nodes[idx], type_nodes[*p], attrs!())?;
        }
    }

    let known_type = |name: &str| by_name.contains_key(name) || PRIMITIVES.contains(&name);
    let check_type = |c: &Located<'_>, ty: &Ident| -> Result<(), FrontendError> {
        if known_type(&ty.text) {
            Ok(())
        } else {
            Err(FrontendError::Unresolved {
                at: c.at(ty.span.start),
                name: ty.text.clone(),
                message: "unknown type".into(),
            })
        }
    };

    // Members.
    let mut method_nodes: Vec<Vec<NodeId>> = Vec::with_capacity(classes.len());
    for (idx, c) in classes.iter().enumerate() {
        let owner = type_nodes[idx];
        let owner_name = c.class.name.text.as_str();
        let mut seen_fields = BTreeSet::new();
        for field in &c.class.fields {
            check_type(c, &field.ty)?;
            if !seen_fields.insert(field.name.text.as_str()) {
                return Err(FrontendError::Duplicate {
                    at: c.at(field.name.span.start),
                    name: format!("{owner_name}.{}", field.name.text),
                });
            }
            let node = builder.add_node_spanned(
                tags::FIELD,
                &field.name.text,
                attrs!(attr::TYPE => field.ty.text.as_str(), attr::DECLARING_TYPE => owner_name),
                c.span(field.ty.span.to(field.name.span)),
            )?;
            if c.class.stub {
                builder.tag_node(node, tags::STUB)?;
            }
            builder.add_edge(tags::DECLARES, owner, node, attrs!())?;
        }
        let mut seen_methods = BTreeSet::new();
        let mut nodes = Vec::new();
        for method in &c.class.methods {
            check_type(c, &method.ret)?;
            if !seen_methods.insert((method.name.text.as_str(), method.params.len())) {
                return Err(FrontendError::Duplicate {
                    at: c.at(method.name.span.start),
                    name: format!("{owner_name}.{}/{}", method.name.text, method.params.len()),
                });
            }
            let node = builder.add_node_spanned(
                tags::METHOD,
                &method.name.text,
                attrs!(
                    attr::ARITY => method.params.len() as i64,
                    attr::RETURN_TYPE => method.ret.text.as_str(),
                    attr::DECLARING_TYPE => owner_name,
                ),
                c.span(method.span),
            )?;
            if c.class.stub {
                builder.tag_node(node, tags::STUB)?;
            }
            builder.add_edge(tags::DECLARES, owner, node, attrs!())?;
            let mut param_names = BTreeSet::new();
            for (i, param) in method.params.iter().enumerate() {
                check_type(c, &param.ty)?;
                if !param_names.insert(param.name.text.as_str()) {
                    return Err(FrontendError::Duplicate {
                        at: c.at(param.name.span.start),
                        name: param.name.text.clone(),
                    });
                }
                let p = builder.add_node_spanned(
                    tags::VARIABLE,
                    &param.name.text,
                    attrs!(
                        attr::TYPE => param.ty.text.as_str(),
                        attr::ROLE => attr::ROLE_PARAM,
                        attr::INDEX => i as i64,
                    ),
                    c.span(param.ty.span.to(param.name.span)),
                )?;
                builder.add_edge(tags::DECLARES, node, p, attrs!())?;
            }
            nodes.push(node);
        }
        method_nodes.push(nodes);
    }

    let hierarchy = Hierarchy::build(builder.graph());

    // Overrides: nearest superclass declaration with the same name and arity.
    for (idx, c) in classes.iter().enumerate() {
        let Some(sup) = hierarchy.supertype(type_nodes[idx]) else {
            continue;
        };
        for (method, node) in c.class.methods.iter().zip(&method_nodes[idx]) {
            let overridden = hierarchy.lookup_method(builder.graph(), sup, &method.name.text, method.params.len());
            if let Some(target) = overridden {
                builder.add_edge(tags::OVERRIDES, *node, target, attrs!())?;
            }
        }
    }

    let mut lowerer = Lowerer {
        builder,
        hierarchy,
        flows: BTreeSet::new(),
        calls: Vec::new(),
        returns: BTreeMap::new(),
    };
    for (idx, c) in classes.iter().enumerate() {
        for (method, node) in c.class.methods.iter().zip(&method_nodes[idx]) {
            if let Some(body) = &method.body {
                let mut scope = MethodScope::new(c, type_nodes[idx], *node, method, lowerer.builder.graph(), &lowerer.hierarchy);
                lowerer.body(&mut scope, body)?;
            }
        }
    }
    lowerer.link_calls()
}

struct MethodScope<'c, 'a> {
    unit: &'c Located<'a>,
    owner: NodeId,
    method: NodeId,
    scopes: Vec<BTreeMap<String, (NodeId, String)>>,
}

impl<'c, 'a> MethodScope<'c, 'a> {
    fn new(
        unit: &'c Located<'a>,
        owner: NodeId,
        method: NodeId,
        decl: &MethodDecl,
        graph: &crate::graph::ProgramGraph,
        hierarchy: &Hierarchy,
    ) -> Self {
        let mut params = BTreeMap::new();
        for (p, decl) in hierarchy.params(method).iter().zip(&decl.params) {
            let ty = graph.node(*p).and_then(|n| n.attr_str(attr::TYPE)).unwrap_or("").to_owned();
            params.insert(decl.name.text.clone(), (*p, ty));
        }
        MethodScope {
            unit,
            owner,
            method,
            scopes: vec![params],
        }
    }

    fn lookup(&self, name: &str) -> Option<&(NodeId, String)> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }
}

impl Lowerer<'_> {
    fn graph(&self) -> &crate::graph::ProgramGraph {
        self.builder.graph()
    }

    fn resolve_ty(&self, name: &str) -> Ty {
        match self.hierarchy.type_named(name) {
            Some(id) => Ty::Class(id),
            None => Ty::Prim(name.to_owned()),
        }
    }

    fn flow(&mut self, from: NodeId, to: NodeId) -> Result<(), FrontendError> {
        if self.flows.insert((from, to)) {
            self.builder.add_edge(tags::DATA_FLOW, from, to, attrs!())?;
        }
        Ok(())
    }

    fn flows(&mut self, sources: &[NodeId], to: NodeId) -> Result<(), FrontendError> {
        for s in sources {
            self.flow(*s, to)?;
        }
        Ok(())
    }

    fn body(&mut self, scope: &mut MethodScope<'_, '_>, body: &[Stmt]) -> Result<(), FrontendError> {
        let method = scope.method;
        self.block(scope, body, vec![method])?;
        Ok(())
    }

    /// Lowers a block; `preds` are the control-flow predecessors of its
    /// first statement. Returns the statements control can leave through.
    fn block(
        &mut self,
        scope: &mut MethodScope<'_, '_>,
        stmts: &[Stmt],
        preds: Vec<NodeId>,
    ) -> Result<Vec<NodeId>, FrontendError> {
        scope.scopes.push(BTreeMap::new());
        let mut preds = preds;
        for stmt in stmts {
            preds = self.statement(scope, stmt, &preds)?;
        }
        scope.scopes.pop();
        Ok(preds)
    }

    fn statement(
        &mut self,
        scope: &mut MethodScope<'_, '_>,
        stmt: &Stmt,
        preds: &[NodeId],
    ) -> Result<Vec<NodeId>, FrontendError> {
        let node = self.builder.add_node_spanned(
            tags::STATEMENT,
            stmt.kind.label(),
            attrs!(attr::STATEMENT_KIND => stmt.kind.label()),
            scope.unit.span(stmt.span),
        )?;
        self.builder.add_edge(tags::DECLARES, scope.method, node, attrs!())?;
        for p in preds {
            self.builder.add_edge(tags::CONTROL_FLOW, *p, node, attrs!())?;
        }
        match &stmt.kind {
            StmtKind::Local { ty, name, init } => {
                if !PRIMITIVES.contains(&ty.text.as_str()) && self.hierarchy.type_named(&ty.text).is_none() {
                    return Err(FrontendError::Unresolved {
                        at: scope.unit.at(ty.span.start),
                        name: ty.text.clone(),
                        message: "unknown type".into(),
                    });
                }
                let local = self.builder.add_node_spanned(
                    tags::VARIABLE,
                    &name.text,
                    attrs!(attr::TYPE => ty.text.as_str(), attr::ROLE => attr::ROLE_LOCAL),
                    scope.unit.span(ty.span.to(name.span)),
                )?;
                self.builder.add_edge(tags::DECLARES, scope.method, local, attrs!())?;
                if let Some(init) = init {
                    let (sources, _) = self.expr(scope, node, init)?;
                    self.flows(&sources, local)?;
                }
                scope
                    .scopes
                    .last_mut()
                    .expect("block scope")
                    .insert(name.text.clone(), (local, ty.text.clone()));
                Ok(vec![node])
            }
            StmtKind::Assign { target, value } => {
                let (sources, _) = self.expr(scope, node, value)?;
                let target = match target {
                    LValue::Name(id) => self.name_target(scope, id)?,
                    LValue::Field(obj, field) => {
                        let (_, ty) = self.expr(scope, node, obj)?;
                        self.field_of(scope, &ty, field)?.0
                    }
                };
                self.flows(&sources, target)?;
                Ok(vec![node])
            }
            StmtKind::Expr(expr) => {
                self.expr(scope, node, expr)?;
                Ok(vec![node])
            }
            StmtKind::Return(value) => {
                if let Some(value) = value {
                    let (sources, _) = self.expr(scope, node, value)?;
                    self.returns.entry(scope.method).or_default().extend(sources);
                }
                Ok(Vec::new())
            }
            StmtKind::If { cond, then, otherwise } => {
                self.expr(scope, node, cond)?;
                let mut exits = self.block(scope, then, vec![node])?;
                match otherwise {
                    Some(other) => exits.extend(self.block(scope, other, vec![node])?),
                    None => exits.push(node),
                }
                Ok(exits)
            }
            StmtKind::While { cond, body } => {
                self.expr(scope, node, cond)?;
                let exits = self.block(scope, body, vec![node])?;
                for e in exits {
                    self.builder.add_edge(tags::CONTROL_FLOW, e, node, attrs!(attr::STATEMENT_KIND => "loop"))?;
                }
                Ok(vec![node])
            }
        }
    }

    fn name_target(&mut self, scope: &MethodScope<'_, '_>, id: &Ident) -> Result<NodeId, FrontendError> {
        if let Some((node, _)) = scope.lookup(&id.text) {
            return Ok(*node);
        }
        match self.hierarchy.lookup_field(self.graph(), scope.owner, &id.text) {
            Some(f) => Ok(f),
            None => Err(FrontendError::Unresolved {
                at: scope.unit.at(id.span.start),
                name: id.text.clone(),
                message: "not a local, parameter or field".into(),
            }),
        }
    }

    fn field_of(&self, scope: &MethodScope<'_, '_>, ty: &Ty, field: &Ident) -> Result<(NodeId, Ty), FrontendError> {
        let unresolved = |message: &str| FrontendError::Unresolved {
            at: scope.unit.at(field.span.start),
            name: field.text.clone(),
            message: message.into(),
        };
        let Ty::Class(class) = ty else {
            return Err(unresolved("field access on a non-class value"));
        };
        let f = self
            .hierarchy
            .lookup_field(self.graph(), *class, &field.text)
            .ok_or_else(|| unresolved("no such field"))?;
        let fty = self.graph().node(f).and_then(|n| n.attr_str(attr::TYPE)).unwrap_or("").to_owned();
        Ok((f, self.resolve_ty(&fty)))
    }

    fn literal(
        &mut self,
        scope: &MethodScope<'_, '_>,
        stmt: NodeId,
        text: String,
        value: Option<Value>,
        span: Span,
    ) -> Result<NodeId, FrontendError> {
        let mut a = attrs!();
        if let Some(v) = value {
            a.insert(attr::VALUE.to_owned(), v);
        }
        let lit = self.builder.add_node_spanned(tags::LITERAL, &text, a, scope.unit.span(span))?;
        self.builder.add_edge(tags::DECLARES, stmt, lit, attrs!())?;
        Ok(lit)
    }

    /// Lowers an expression. Returns the nodes whose values flow into it
    /// and its static type.
    fn expr(
        &mut self,
        scope: &MethodScope<'_, '_>,
        stmt: NodeId,
        expr: &Expr,
    ) -> Result<(Vec<NodeId>, Ty), FrontendError> {
        match &expr.kind {
            ExprKind::Int(i) => {
                let lit = self.literal(scope, stmt, i.to_string(), Some(Value::Int(*i)), expr.span)?;
                Ok((vec![lit], Ty::Prim("int".into())))
            }
            ExprKind::Str(s) => {
                let lit = self.literal(scope, stmt, format!("{s:?}"), Some(Value::Str(s.clone())), expr.span)?;
                Ok((vec![lit], self.resolve_ty("String")))
            }
            ExprKind::Bool(b) => {
                let lit = self.literal(scope, stmt, b.to_string(), Some(Value::Bool(*b)), expr.span)?;
                Ok((vec![lit], Ty::Prim("boolean".into())))
            }
            ExprKind::Null => {
                let lit = self.literal(scope, stmt, "null".into(), None, expr.span)?;
                Ok((vec![lit], Ty::Null))
            }
            ExprKind::This => Ok((Vec::new(), Ty::Class(scope.owner))),
            ExprKind::Name(id) => {
                if let Some((node, ty)) = scope.lookup(&id.text) {
                    let ty = self.resolve_ty(ty);
                    return Ok((vec![*node], ty));
                }
                let (f, ty) = self.field_of(scope, &Ty::Class(scope.owner), id).map_err(|_| FrontendError::Unresolved {
                    at: scope.unit.at(id.span.start),
                    name: id.text.clone(),
                    message: "not a local, parameter or field".into(),
                })?;
                Ok((vec![f], ty))
            }
            ExprKind::New(ty) => {
                let Some(class) = self.hierarchy.type_named(&ty.text) else {
                    return Err(FrontendError::Unresolved {
                        at: scope.unit.at(ty.span.start),
                        name: ty.text.clone(),
                        message: "cannot instantiate unknown type".into(),
                    });
                };
                self.builder.add_edge(
                    tags::INSTANTIATES,
                    scope.method,
                    class,
                    span_attrs(scope.unit.span(expr.span)),
                )?;
                Ok((Vec::new(), Ty::Class(class)))
            }
            ExprKind::Field(obj, field) => {
                let (_, ty) = self.expr(scope, stmt, obj)?;
                let (f, fty) = self.field_of(scope, &ty, field)?;
                Ok((vec![f], fty))
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let (mut sources, lt) = self.expr(scope, stmt, lhs)?;
                let (more, rt) = self.expr(scope, stmt, rhs)?;
                sources.extend(more);
                let ty = match op {
                    BinOp::Add if is_string(&lt, self) || is_string(&rt, self) => self.resolve_ty("String"),
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => Ty::Prim("int".into()),
                    _ => Ty::Prim("boolean".into()),
                };
                Ok((sources, ty))
            }
            ExprKind::Unary(op, inner) => {
                let (sources, _) = self.expr(scope, stmt, inner)?;
                let ty = match op {
                    UnOp::Not => Ty::Prim("boolean".into()),
                    UnOp::Neg => Ty::Prim("int".into()),
                };
                Ok((sources, ty))
            }
            ExprKind::Call { receiver, name, args } => {
                let (receiver_sources, recv_ty) = match receiver {
                    Some(r) => self.expr(scope, stmt, r)?,
                    None => (Vec::new(), Ty::Class(scope.owner)),
                };
                let Ty::Class(static_type) = recv_ty else {
                    return Err(FrontendError::Unresolved {
                        at: scope.unit.at(name.span.start),
                        name: name.text.clone(),
                        message: "method call on a non-class value".into(),
                    });
                };
                let declared = self
                    .hierarchy
                    .lookup_method(self.graph(), static_type, &name.text, args.len())
                    .ok_or_else(|| FrontendError::Unresolved {
                        at: scope.unit.at(name.span.start),
                        name: name.text.clone(),
                        message: format!(
                            "no method with {} argument(s) on `{}`",
                            args.len(),
                            self.graph().name(static_type)
                        ),
                    })?;
                let mut arg_sources = Vec::with_capacity(args.len());
                for a in args {
                    arg_sources.push(self.expr(scope, stmt, a)?.0);
                }
                let ret = self
                    .graph()
                    .node(declared)
                    .and_then(|n| n.attr_str(attr::RETURN_TYPE))
                    .unwrap_or("void")
                    .to_owned();
                let span = scope.unit.span(expr.span);
                let result = self.builder.add_node_spanned(
                    tags::CALLSITE_RESULT,
                    &format!("{}()", name.text),
                    attrs!(
                        attr::CALLEE => name.text.as_str(),
                        attr::ARITY => args.len() as i64,
                        attr::RECEIVER_TYPE => self.graph().name(static_type).to_owned(),
                        attr::TYPE => ret.as_str(),
                    ),
                    span.clone(),
                )?;
                self.builder.add_edge(tags::DECLARES, stmt, result, attrs!())?;
                self.calls.push(CallSite {
                    caller: scope.method,
                    static_type,
                    name: name.text.clone(),
                    arity: args.len(),
                    result,
                    receiver: receiver_sources,
                    args: arg_sources,
                    span,
                });
                Ok((vec![result], self.resolve_ty(&ret)))
            }
        }
    }

    /// CALL edges plus inter-procedural flows for every recorded call site.
    fn link_calls(mut self) -> Result<(), FrontendError> {
        let calls = std::mem::take(&mut self.calls);
        let mut call_edges: BTreeMap<(NodeId, NodeId), EdgeId> = BTreeMap::new();
        for site in &calls {
            let targets = self
                .hierarchy
                .dispatch_targets(self.graph(), site.static_type, &site.name, site.arity);
            for target in targets {
                match call_edges.get(&(site.caller, target)) {
                    Some(edge) => {
                        let count = self
                            .graph()
                            .edge(*edge)
                            .and_then(|e| e.attrs.get(attr::CALLSITES))
                            .and_then(Value::as_int)
                            .unwrap_or(1);
                        self.builder
                            .set_attr((*edge).into(), attr::CALLSITES, Value::Int(count + 1))?;
                    }
                    None => {
                        let mut a = span_attrs(site.span.clone());
                        a.insert(attr::CALLSITES.to_owned(), Value::Int(1));
                        let edge = self.builder.add_edge(tags::CALL, site.caller, target, a)?;
                        call_edges.insert((site.caller, target), edge);
                    }
                }
                let params = self.hierarchy.params(target).to_vec();
                for (sources, param) in site.args.iter().zip(params) {
                    self.flows(sources, param)?;
                }
                if let Some(returned) = self.returns.get(&target).cloned() {
                    self.flows(&returned, site.result)?;
                }
                if self.graph().node_has_tag(target, tags::STUB) {
                    let receiver = site.receiver.clone();
                    self.flows(&receiver, site.result)?;
                }
            }
        }
        Ok(())
    }
}

fn is_string(ty: &Ty, lowerer: &Lowerer<'_>) -> bool {
    match ty {
        Ty::Prim(p) => p == "String",
        Ty::Class(c) => lowerer.graph().name(*c) == "String",
        Ty::Null => false,
    }
}

fn span_attrs(span: Option<SourceSpan>) -> crate::graph::Attrs {
    match span {
        Some(s) => attrs!(
            attr::SPAN_PATH => s.path,
            attr::SPAN_START => s.start as i64,
            attr::SPAN_END => s.end as i64,
        ),
        None => attrs!(),
    }
}
