use std::collections::BTreeMap;

use super::{
    resolve_entry_points, run_rta, Endpoint, Enrichment, IndexError, IndexInputs, Indexer, IndexerDescriptor,
    WorklistOrder,
};
use crate::attrs;
use crate::frontend::profile::split_signature;
use crate::graph::tags::{self, attr};
use crate::graph::{NodeId, ProgramGraph, Value};
use crate::hierarchy::Hierarchy;

pub const DEFAULT_PRIORITY_THRESHOLD: i64 = 100;

fn descriptor(name: &str, deps: &[&str], namespace: &[&str]) -> IndexerDescriptor {
    IndexerDescriptor {
        name: name.to_owned(),
        dependencies: deps.iter().map(|s| (*s).to_owned()).collect(),
        namespace: namespace.iter().map(|s| (*s).to_owned()).collect(),
    }
}

/// Links layout click handlers to methods of the same name.
///
/// Each match gets an XML_CALLBACK edge element→method and the XML_HANDLER
/// tag; the element also flows into the handler's first parameter, the
/// view argument the platform passes to click handlers.
#[derive(Debug, Clone, Copy, Default)]
pub struct XmlCallbackIndexer;

impl Indexer for XmlCallbackIndexer {
    fn descriptor(&self) -> IndexerDescriptor {
        descriptor("xml-callbacks", &[], &[tags::XML_CALLBACK, tags::XML_HANDLER, tags::DATA_FLOW])
    }

    fn run(&self, graph: &ProgramGraph, inputs: &IndexInputs) -> Result<Enrichment, IndexError> {
        let hierarchy = Hierarchy::build(graph);
        let mut out = Enrichment::default();
        for cb in &inputs.callbacks {
            let handlers: Vec<NodeId> = graph
                .nodes_tagged(tags::METHOD)
                .filter(|m| m.name() == cb.handler && !m.has_tag(tags::STUB))
                .map(|m| m.id)
                .collect();
            if handlers.is_empty() {
                out.warn(format!(
                    "layout handler `{}` on element {} matches no method",
                    cb.handler, cb.element
                ));
            }
            for h in handlers {
                let element = Endpoint::Existing(cb.element);
                out.add_edge(tags::XML_CALLBACK, element, Endpoint::Existing(h), attrs!());
                out.tag_node(h, tags::XML_HANDLER);
                if let Some(p) = hierarchy.params(h).first() {
                    out.add_edge(tags::DATA_FLOW, element, Endpoint::Existing(*p), attrs!());
                }
            }
        }
        Ok(out)
    }
}

/// Tags feasible CALL edges, reachable methods and entry points.
#[derive(Debug, Clone, Copy, Default)]
pub struct RtaIndexer;

impl Indexer for RtaIndexer {
    fn descriptor(&self) -> IndexerDescriptor {
        descriptor(
            "rta",
            &["xml-callbacks"],
            &[tags::RTA_FEASIBLE, tags::RTA_REACHABLE, tags::ENTRY_POINT],
        )
    }

    fn run(&self, graph: &ProgramGraph, inputs: &IndexInputs) -> Result<Enrichment, IndexError> {
        let entries = resolve_entry_points(graph, &inputs.profile)?;
        let result = run_rta(graph, &entries, WorklistOrder::Fifo);
        let mut out = Enrichment::default();
        for m in &result.entry_points {
            out.tag_node(*m, tags::ENTRY_POINT);
        }
        for m in &result.reachable {
            out.tag_node(*m, tags::RTA_REACHABLE);
        }
        for e in &result.feasible {
            out.tag_edge(*e, tags::RTA_FEASIBLE);
        }
        Ok(out)
    }
}

/// Marks permission-protected methods and adds a PERMISSION node per
/// permission the manifest requests.
#[derive(Debug, Clone, Copy, Default)]
pub struct PermissionIndexer;

impl Indexer for PermissionIndexer {
    fn descriptor(&self) -> IndexerDescriptor {
        descriptor(
            "permissions",
            &[],
            &[
                tags::PERMISSION_PROTECTED,
                tags::PERMISSION,
                tags::DECLARED,
                attr::PERMISSION,
                attr::PROTECTION_LEVEL,
                attr::GROUP,
            ],
        )
    }

    fn run(&self, graph: &ProgramGraph, inputs: &IndexInputs) -> Result<Enrichment, IndexError> {
        let hierarchy = Hierarchy::build(graph);
        let map = &inputs.permissions;
        let mut out = Enrichment::default();
        // Method → guarding permissions, so multi-permission methods get one
        // comma-joined attribute value.
        let mut guards: BTreeMap<NodeId, Vec<&str>> = BTreeMap::new();
        for (perm, entry) in &map.permissions {
            for sig in &entry.methods {
                let Ok((ty, m)) = split_signature(sig) else { continue };
                let methods: Vec<NodeId> = hierarchy
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
                if methods.is_empty() {
                    out.warn(format!("permission map: `{sig}` ({perm}) is not in the graph"));
                }
                for id in methods {
                    guards.entry(id).or_default().push(perm);
                }
            }
        }
        for (method, perms) in guards {
            let levels: Vec<&str> = perms.iter().map(|p| map.protection_level(p).unwrap_or("")).collect();
            let groups: Vec<&str> = perms.iter().map(|p| map.group(p).unwrap_or("")).collect();
            out.tag_node(method, tags::PERMISSION_PROTECTED);
            out.set_attr(method, attr::PERMISSION, perms.join(","));
            out.set_attr(method, attr::PROTECTION_LEVEL, levels.join(","));
            out.set_attr(method, attr::GROUP, groups.join(","));
        }
        for perm in &inputs.manifest.permissions {
            let mut a = attrs!();
            if let Some(level) = map.protection_level(perm) {
                a.insert(attr::PROTECTION_LEVEL.to_owned(), Value::from(level));
            }
            if let Some(group) = map.group(perm) {
                a.insert(attr::GROUP.to_owned(), Value::from(group));
            }
            out.add_node(tags::PERMISSION, perm, a, &[tags::DECLARED]);
        }
        Ok(out)
    }
}

/// Records receiver priorities and tags high-priority receiver types.
#[derive(Debug, Clone, Copy)]
pub struct ManifestIndexer {
    pub threshold: i64,
}

impl Default for ManifestIndexer {
    fn default() -> Self {
        ManifestIndexer {
            threshold: DEFAULT_PRIORITY_THRESHOLD,
        }
    }
}

impl Indexer for ManifestIndexer {
    fn descriptor(&self) -> IndexerDescriptor {
        descriptor("manifest", &[], &[tags::MANIFEST_HIGH_PRIORITY, attr::PRIORITY])
    }

    fn run(&self, graph: &ProgramGraph, inputs: &IndexInputs) -> Result<Enrichment, IndexError> {
        let mut out = Enrichment::default();
        for r in &inputs.manifest.receivers {
            let types: Vec<NodeId> = graph
                .nodes_tagged(tags::TYPE)
                .filter(|t| t.name() == r.name && !t.has_tag(tags::STUB))
                .map(|t| t.id)
                .collect();
            if types.is_empty() {
                out.warn(format!("manifest receiver `{}` does not name an app type", r.name));
            }
            for t in types {
                out.set_attr(t, attr::PRIORITY, r.priority);
                if r.priority >= self.threshold {
                    out.tag_node(t, tags::MANIFEST_HIGH_PRIORITY);
                }
            }
        }
        Ok(out)
    }
}
