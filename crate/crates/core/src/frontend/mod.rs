//! Front ends: everything that turns input files into graph content.

pub mod dot;
pub mod json;
pub mod layout;
pub mod manifest;
pub mod miniapp;
pub mod permission_map;
pub mod profile;
mod xml;

use std::fmt;

use thiserror::Error;

use crate::graph::GraphError;

pub use dot::export_dot;
pub use json::{export_graph_json, export_subgraph_json, import_graph_json, GraphDocument};
pub use layout::{parse_layout, PendingCallback};
pub use manifest::{parse_manifest, ManifestModel, Receiver};
pub use miniapp::{parse_miniapp, SourceUnit};
pub use permission_map::{parse_permission_map, PermissionEntry, PermissionMap};
pub use profile::{parse_profile, PlatformProfile};

/// A position inside an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub path: String,
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub fn in_text(path: &str, text: &str, offset: usize) -> Self {
        let offset = offset.min(text.len());
        let before = &text[..offset];
        Location {
            path: path.to_owned(),
            offset,
            line: before.matches('\n').count() + 1,
            column: before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.path, self.line, self.column)
    }
}

/// Non-fatal diagnostic produced while reading inputs or indexing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Warning(pub String);

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Warning {
    pub(crate) fn emit(message: String) -> Warning {
        log::warn!("{message}");
        Warning(message)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{at}: syntax error: {message}")]
    Syntax { at: Location, message: String },
    #[error("{at}: unresolved name `{name}`: {message}")]
    Unresolved { at: Location, name: String, message: String },
    #[error("{at}: duplicate declaration `{name}`")]
    Duplicate { at: Location, name: String },
    #[error("inheritance cycle through {}", .0.join(" -> "))]
    InheritanceCycle(Vec<String>),
    #[error("{at}: malformed XML: {message}")]
    Xml { at: Location, message: String },
    #[error("receiver `{receiver}` has priority {priority}, outside [-1000, 2147483647]")]
    PriorityOutOfRange { receiver: String, priority: i64 },
    #[error("permission `{permission}`: invalid protection level `{level}`")]
    InvalidProtectionLevel { permission: String, level: String },
    #[error("invalid method signature `{0}`; expected `TypeName.methodName`")]
    InvalidSignature(String),
    #[error("platform profile: {0}")]
    Profile(String),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}
