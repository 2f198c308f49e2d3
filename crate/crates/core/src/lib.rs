//! Program-graph audit toolkit: an attributed program graph, a query
//! algebra over it, front ends that build graphs from app sources and
//! resources, enrichment passes, security analyzers and the audit
//! service that schedules them.

pub mod analyze;
pub mod audit;
pub mod frontend;
pub mod graph;
pub mod hierarchy;
pub mod index;
pub mod query;
#[cfg(test)]
mod testutil;

pub use graph::{EdgeId, ElementId, GraphBuilder, GraphError, NodeId, ProgramGraph, Value};
pub use query::{QueryError, Subgraph};
