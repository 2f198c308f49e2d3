//! Enrichment passes run over the unfrozen graph, and the pipeline that
//! orders them.
//!
//! An indexer never mutates the graph directly: it reads a snapshot and
//! returns an [`Enrichment`]. The pipeline applies enrichments in indexer
//! name order, so the resulting graph does not depend on which indexer of
//! a wave finished first.

mod builtin;
pub mod rta;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frontend::{ManifestModel, PendingCallback, PermissionMap, PlatformProfile, Warning};
use crate::graph::{Attrs, EdgeId, ElementId, GraphBuilder, GraphError, NodeId, ProgramGraph, Value};

pub use builtin::{ManifestIndexer, PermissionIndexer, RtaIndexer, XmlCallbackIndexer, DEFAULT_PRIORITY_THRESHOLD};
pub use rta::{resolve_entry_points, run_rta, RtaResult, WorklistOrder};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("indexer dependency cycle: {}", .0.join(" -> "))]
    DependencyCycle(Vec<String>),
    #[error("unknown indexer `{0}`")]
    UnknownIndexer(String),
    #[error("duplicate indexer `{0}`")]
    DuplicateIndexer(String),
    #[error("indexer `{indexer}` depends on `{dependency}`, which is not in the pipeline")]
    MissingDependency { indexer: String, dependency: String },
    #[error("entry point `{0}` does not resolve to a method")]
    MissingEntryPoint(String),
    #[error("no entry points: the profile names none that exist and no layout handlers were linked")]
    NoEntryPoints,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Everything besides the graph that indexers may consult.
#[derive(Debug, Clone, Default)]
pub struct IndexInputs {
    pub profile: PlatformProfile,
    pub manifest: ManifestModel,
    pub permissions: PermissionMap,
    pub callbacks: Vec<PendingCallback>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexerDescriptor {
    pub name: String,
    pub dependencies: Vec<String>,
    /// Tags, kinds and attribute keys the indexer writes. Indexers of one
    /// wave run concurrently only when these sets are disjoint.
    pub namespace: Vec<String>,
}

pub trait Indexer: Send + Sync {
    fn descriptor(&self) -> IndexerDescriptor;
    fn run(&self, graph: &ProgramGraph, inputs: &IndexInputs) -> Result<Enrichment, IndexError>;
}

/// Refers to an existing node or to a node added earlier in the same
/// enrichment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Existing(NodeId),
    Added(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Change {
    TagNode(NodeId, String),
    TagEdge(EdgeId, String),
    SetAttr(ElementId, String, Value),
    AddNode {
        kind: String,
        name: String,
        attrs: Attrs,
        tags: Vec<String>,
    },
    AddEdge { kind: String, from: Endpoint, to: Endpoint, attrs: Attrs },
}

/// A batch of additive changes produced by one indexer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Enrichment {
    pub changes: Vec<Change>,
    pub warnings: Vec<Warning>,
    added_nodes: usize,
}

impl Enrichment {
    pub fn tag_node(&mut self, id: NodeId, tag: &str) {
        self.changes.push(Change::TagNode(id, tag.to_owned()));
    }

    pub fn tag_edge(&mut self, id: EdgeId, tag: &str) {
        self.changes.push(Change::TagEdge(id, tag.to_owned()));
    }

    pub fn set_attr(&mut self, target: impl Into<ElementId>, key: &str, value: impl Into<Value>) {
        self.changes.push(Change::SetAttr(target.into(), key.to_owned(), value.into()));
    }

    /// Adds a node of `kind` that also carries `extra` tags.
    pub fn add_node(&mut self, kind: &str, name: &str, attrs: Attrs, extra: &[&str]) -> Endpoint {
        self.changes.push(Change::AddNode {
            kind: kind.to_owned(),
            name: name.to_owned(),
            attrs,
            tags: extra.iter().map(|t| (*t).to_owned()).collect(),
        });
        self.added_nodes += 1;
        Endpoint::Added(self.added_nodes - 1)
    }

    pub fn add_edge(&mut self, kind: &str, from: Endpoint, to: Endpoint, attrs: Attrs) {
        self.changes.push(Change::AddEdge {
            kind: kind.to_owned(),
            from,
            to,
            attrs,
        });
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(Warning::emit(message));
    }

    /// Applies the changes in order.
    pub fn apply(&self, builder: &mut GraphBuilder) -> Result<(), GraphError> {
        let mut added = Vec::new();
        let resolve = |added: &Vec<NodeId>, e: Endpoint| match e {
            Endpoint::Existing(id) => Ok(id),
            Endpoint::Added(i) => added.get(i).copied().ok_or(GraphError::UnknownNode(NodeId(u32::MAX))),
        };
        for change in &self.changes {
            match change {
                Change::TagNode(id, tag) => builder.tag_node(*id, tag)?,
                Change::TagEdge(id, tag) => builder.tag_edge(*id, tag)?,
                Change::SetAttr(target, key, value) => builder.set_attr(*target, key, value.clone())?,
                Change::AddNode { kind, name, attrs, tags } => {
                    let id = builder.add_node(kind, name, attrs.clone())?;
                    for t in tags {
                        builder.tag_node(id, t)?;
                    }
                    added.push(id);
                }
                Change::AddEdge { kind, from, to, attrs } => {
                    let (from, to) = (resolve(&added, *from)?, resolve(&added, *to)?);
                    builder.add_edge(kind, from, to, attrs.clone())?;
                }
            }
        }
        Ok(())
    }
}

/// How the pipeline runs the indexers of one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Spawn in name order.
    #[default]
    Canonical,
    /// Spawn in a seeded random order with seeded start delays. Used to
    /// show that the output does not depend on the interleaving.
    Randomized(u64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexReport {
    /// Groups of indexers that ran concurrently, in execution order.
    pub groups: Vec<Vec<String>>,
    pub warnings: Vec<Warning>,
}

impl IndexReport {
    pub fn completed(&self) -> BTreeSet<String> {
        self.groups.iter().flatten().cloned().collect()
    }
}

pub struct IndexPipeline {
    indexers: BTreeMap<String, Box<dyn Indexer>>,
    groups: Vec<Vec<String>>,
}

impl std::fmt::Debug for IndexPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IndexPipeline").field("groups", &self.groups).finish()
    }
}

/// Names of the built-in indexers.
pub const BUILTIN_INDEXERS: &[&str] = &["manifest", "permissions", "rta", "xml-callbacks"];

/// Builds a built-in indexer by name.
pub fn builtin_indexer(name: &str, priority_threshold: i64) -> Result<Box<dyn Indexer>, IndexError> {
    Ok(match name {
        "manifest" => Box::new(ManifestIndexer {
            threshold: priority_threshold,
        }),
        "permissions" => Box::new(PermissionIndexer),
        "rta" => Box::new(RtaIndexer),
        "xml-callbacks" => Box::new(XmlCallbackIndexer),
        other => return Err(IndexError::UnknownIndexer(other.to_owned())),
    })
}

impl IndexPipeline {
    /// Validates names and dependencies and fixes the execution plan.
    pub fn new(indexers: Vec<Box<dyn Indexer>>) -> Result<Self, IndexError> {
        let mut by_name = BTreeMap::new();
        let mut descriptors = BTreeMap::new();
        for ix in indexers {
            let d = ix.descriptor();
            if by_name.contains_key(&d.name) {
                return Err(IndexError::DuplicateIndexer(d.name));
            }
            by_name.insert(d.name.clone(), ix);
            descriptors.insert(d.name.clone(), d);
        }
        for d in descriptors.values() {
            for dep in &d.dependencies {
                if !descriptors.contains_key(dep) {
                    return Err(IndexError::MissingDependency {
                        indexer: d.name.clone(),
                        dependency: dep.clone(),
                    });
                }
            }
        }
        let waves = waves(&descriptors)?;
        let mut groups = Vec::new();
        for wave in waves {
            // Greedy split into groups whose namespaces are pairwise disjoint.
            let mut wave_groups: Vec<(Vec<String>, BTreeSet<String>)> = Vec::new();
            for name in wave {
                let ns: BTreeSet<String> = descriptors[&name].namespace.iter().cloned().collect();
                match wave_groups.iter_mut().find(|(_, used)| used.is_disjoint(&ns)) {
                    Some((members, used)) => {
                        members.push(name);
                        used.extend(ns);
                    }
                    None => wave_groups.push((vec![name], ns)),
                }
            }
            groups.extend(wave_groups.into_iter().map(|(m, _)| m));
        }
        Ok(IndexPipeline {
            indexers: by_name,
            groups,
        })
    }

    /// The built-in indexers named in `names`.
    pub fn builtin(names: &[String], priority_threshold: i64) -> Result<Self, IndexError> {
        let indexers = names
            .iter()
            .map(|n| builtin_indexer(n, priority_threshold))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(indexers)
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    /// Runs every indexer and freezes the result.
    pub fn run(
        &self,
        mut builder: GraphBuilder,
        inputs: &IndexInputs,
        schedule: Schedule,
    ) -> Result<(Arc<ProgramGraph>, IndexReport), IndexError> {
        let mut report = IndexReport::default();
        let mut rng = match schedule {
            Schedule::Canonical => None,
            Schedule::Randomized(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        for group in &self.groups {
            let mut launch: Vec<(&String, u64)> = group.iter().map(|n| (n, 0)).collect();
            if let Some(rng) = rng.as_mut() {
                launch.shuffle(rng);
                for slot in &mut launch {
                    slot.1 = rand::Rng::random_range(rng, 0..300);
                }
            }
            let graph = builder.graph();
            let results: BTreeMap<&String, Result<Enrichment, IndexError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = launch
                    .iter()
                    .map(|(name, delay_us)| {
                        let ix = &self.indexers[*name];
                        let delay = std::time::Duration::from_micros(*delay_us);
                        let handle = scope.spawn(move || {
                            std::thread::sleep(delay);
                            ix.run(graph, inputs)
                        });
                        (*name, handle)
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|(name, h)| (name, h.join().expect("indexer thread panicked")))
                    .collect()
            });
            for (name, result) in results {
                let enrichment = result?;
                log::debug!("indexer {name}: {} changes", enrichment.changes.len());
                enrichment.apply(&mut builder)?;
                report.warnings.extend(enrichment.warnings);
            }
            report.groups.push(group.clone());
        }
        Ok((builder.freeze(), report))
    }
}

/// Kahn layering: each wave holds the indexers whose dependencies all ran
/// in earlier waves, in name order.
fn waves(descriptors: &BTreeMap<String, IndexerDescriptor>) -> Result<Vec<Vec<String>>, IndexError> {
    let mut remaining: BTreeMap<&str, BTreeSet<&str>> = descriptors
        .values()
        .map(|d| (d.name.as_str(), d.dependencies.iter().map(String::as_str).collect()))
        .collect();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let ready: Vec<&str> = remaining
            .iter()
            .filter(|(_, deps)| deps.is_empty())
            .map(|(n, _)| *n)
            .collect();
        if ready.is_empty() {
            return Err(IndexError::DependencyCycle(find_cycle(&remaining)));
        }
        for n in &ready {
            remaining.remove(n);
        }
        for deps in remaining.values_mut() {
            for n in &ready {
                deps.remove(n);
            }
        }
        out.push(ready.into_iter().map(str::to_owned).collect());
    }
    Ok(out)
}

/// A cycle among nodes that all still have unmet dependencies.
pub(crate) fn find_cycle(remaining: &BTreeMap<&str, BTreeSet<&str>>) -> Vec<String> {
    let Some(start) = remaining.keys().next().copied() else {
        return Vec::new();
    };
    let mut path = vec![start];
    let mut cur = start;
    loop {
        let next = remaining[cur]
            .iter()
            .copied()
            .find(|d| remaining.contains_key(d))
            .expect("every remaining node has an unmet dependency");
        if let Some(pos) = path.iter().position(|p| *p == next) {
            let mut cycle: Vec<String> = path[pos..].iter().map(|s| (*s).to_owned()).collect();
            cycle.push(next.to_owned());
            return cycle;
        }
        path.push(next);
        cur = next;
    }
}
