//! Class-hierarchy view over TYPE/METHOD/FIELD nodes.
//!
//! Built from DECLARES and EXTENDS edges so that graphs imported from
//! JSON get the same dispatch rules as graphs built from source.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::tags::{self, attr};
use crate::graph::{NodeId, ProgramGraph};

#[derive(Debug, Clone, Default)]
pub struct Hierarchy {
    by_name: BTreeMap<String, NodeId>,
    supertype: BTreeMap<NodeId, NodeId>,
    subtypes: BTreeMap<NodeId, Vec<NodeId>>,
    methods: BTreeMap<NodeId, Vec<NodeId>>,
    fields: BTreeMap<NodeId, Vec<NodeId>>,
    owner: BTreeMap<NodeId, NodeId>,
    params: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Hierarchy {
    pub fn build(graph: &ProgramGraph) -> Self {
        let mut h = Hierarchy::default();
        for ty in graph.nodes_tagged(tags::TYPE) {
            h.by_name.entry(ty.name().to_owned()).or_insert(ty.id);
            for decl in graph.out_tagged(ty.id, tags::DECLARES) {
                let member = graph.node(decl.to).expect("endpoint exists");
                if member.has_tag(tags::METHOD) {
                    h.methods.entry(ty.id).or_default().push(member.id);
                    h.owner.insert(member.id, ty.id);
                } else if member.has_tag(tags::FIELD) {
                    h.fields.entry(ty.id).or_default().push(member.id);
                    h.owner.insert(member.id, ty.id);
                }
            }
            if let Some(ext) = graph.out_tagged(ty.id, tags::EXTENDS).next() {
                h.supertype.insert(ty.id, ext.to);
                h.subtypes.entry(ext.to).or_default().push(ty.id);
            }
        }
        for method in graph.nodes_tagged(tags::METHOD) {
            let mut params: Vec<(i64, NodeId)> = graph
                .out_tagged(method.id, tags::DECLARES)
                .map(|e| graph.node(e.to).expect("endpoint exists"))
                .filter(|v| v.has_tag(tags::VARIABLE) && v.attr_str(attr::ROLE) == Some(attr::ROLE_PARAM))
                .map(|v| (v.attr_int(attr::INDEX).unwrap_or(0), v.id))
                .collect();
            params.sort();
            h.params.insert(method.id, params.into_iter().map(|(_, id)| id).collect());
        }
        h
    }

    pub fn type_named(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn supertype(&self, ty: NodeId) -> Option<NodeId> {
        self.supertype.get(&ty).copied()
    }

    /// `ty` followed by its superclasses, nearest first.
    pub fn ancestors(&self, ty: NodeId) -> Vec<NodeId> {
        let mut chain = vec![ty];
        let mut seen = BTreeSet::from([ty]);
        let mut cur = ty;
        while let Some(up) = self.supertype(cur) {
            if !seen.insert(up) {
                break;
            }
            chain.push(up);
            cur = up;
        }
        chain
    }

    /// `ty` and every transitive subtype, ascending id order.
    pub fn descendants(&self, ty: NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::from([ty]);
        let mut stack = vec![ty];
        while let Some(t) = stack.pop() {
            for sub in self.subtypes.get(&t).into_iter().flatten() {
                if out.insert(*sub) {
                    stack.push(*sub);
                }
            }
        }
        out
    }

    pub fn is_subtype(&self, sub: NodeId, sup: NodeId) -> bool {
        self.ancestors(sub).contains(&sup)
    }

    pub fn declared_methods(&self, ty: NodeId) -> &[NodeId] {
        self.methods.get(&ty).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn declared_fields(&self, ty: NodeId) -> &[NodeId] {
        self.fields.get(&ty).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn owner(&self, member: NodeId) -> Option<NodeId> {
        self.owner.get(&member).copied()
    }

    pub fn params(&self, method: NodeId) -> &[NodeId] {
        self.params.get(&method).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn declared_method(&self, graph: &ProgramGraph, ty: NodeId, name: &str, arity: usize) -> Option<NodeId> {
        self.declared_methods(ty).iter().copied().find(|m| {
            let node = graph.node(*m).expect("method exists");
            node.name() == name && node.attr_int(attr::ARITY).unwrap_or(0) == arity as i64
        })
    }

    /// Runtime method lookup: the nearest declaration walking up from `ty`.
    pub fn lookup_method(&self, graph: &ProgramGraph, ty: NodeId, name: &str, arity: usize) -> Option<NodeId> {
        self.ancestors(ty)
            .into_iter()
            .find_map(|t| self.declared_method(graph, t, name, arity))
    }

    pub fn lookup_field(&self, graph: &ProgramGraph, ty: NodeId, name: &str) -> Option<NodeId> {
        self.ancestors(ty).into_iter().find_map(|t| {
            self.declared_fields(t)
                .iter()
                .copied()
                .find(|f| graph.name(*f) == name)
        })
    }

    /// Class-hierarchy dispatch: every method a call `name/arity` on a
    /// receiver of static type `ty` can reach at runtime.
    pub fn dispatch_targets(&self, graph: &ProgramGraph, ty: NodeId, name: &str, arity: usize) -> BTreeSet<NodeId> {
        self.descendants(ty)
            .into_iter()
            .filter_map(|c| self.lookup_method(graph, c, name, arity))
            .collect()
    }

    /// Dispatch targets of a CALLSITE_RESULT node, from its
    /// `receiverType`/`callee`/`arity` attributes.
    pub fn callsite_targets(&self, graph: &ProgramGraph, callsite: NodeId) -> BTreeSet<NodeId> {
        let Some(node) = graph.node(callsite) else {
            return BTreeSet::new();
        };
        let (Some(recv), Some(callee)) = (node.attr_str(attr::RECEIVER_TYPE), node.attr_str(attr::CALLEE)) else {
            return BTreeSet::new();
        };
        let arity = node.attr_int(attr::ARITY).unwrap_or(0).max(0) as usize;
        match self.type_named(recv) {
            Some(ty) => self.dispatch_targets(graph, ty, callee, arity),
            None => BTreeSet::new(),
        }
    }

    /// `Type.member` for a method or field node.
    pub fn signature(&self, graph: &ProgramGraph, member: NodeId) -> String {
        match self.owner(member) {
            Some(ty) => format!("{}.{}", graph.name(ty), graph.name(member)),
            None => graph.name(member).to_owned(),
        }
    }
}
