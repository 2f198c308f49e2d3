//! MiniApp: the small class-based source language accepted as app input.

pub mod ast;
mod lexer;
mod lower;
mod parser;

use super::profile::{split_signature, PlatformProfile};
use super::{FrontendError, Location};
use crate::graph::tags;
use crate::graph::GraphBuilder;
use crate::hierarchy::Hierarchy;

/// One `.mapp` source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceUnit {
            path: path.into(),
            text: text.into(),
        }
    }
}

/// Parses one unit without resolving names.
pub fn parse_unit(unit: &SourceUnit) -> Result<Vec<ast::ClassDecl>, FrontendError> {
    parser::parse_classes(&unit.text).map_err(|e| FrontendError::Syntax {
        at: Location::in_text(&unit.path, &unit.text, e.offset),
        message: e.message,
    })
}

/// Parses and lowers `units` together with the profile stubs into a fresh,
/// unfrozen graph. Units are visited in the order given; profile tags are
/// applied to the stub members they name.
pub fn parse_miniapp(units: &[SourceUnit], profile: &PlatformProfile) -> Result<GraphBuilder, FrontendError> {
    profile.validate()?;
    let stubs = profile.stub_classes();
    let mut parsed = Vec::with_capacity(units.len());
    for unit in units {
        parsed.push(parse_unit(unit)?);
    }
    let mut located = Vec::new();
    for class in &stubs {
        located.push(lower::Located {
            path: "<profile>",
            text: "",
            class,
        });
    }
    for (unit, classes) in units.iter().zip(&parsed) {
        for class in classes {
            located.push(lower::Located {
                path: &unit.path,
                text: &unit.text,
                class,
            });
        }
    }

    let mut builder = GraphBuilder::new();
    lower::lower(&mut builder, &located)?;

    let hierarchy = Hierarchy::build(builder.graph());
    for (sig, tag_set) in &profile.tags {
        let (ty, member) = split_signature(sig)?;
        let owner = hierarchy
            .type_named(ty)
            .ok_or_else(|| FrontendError::Profile(format!("no type `{ty}` for `{sig}`")))?;
        let targets: Vec<_> = hierarchy
            .declared_methods(owner)
            .iter()
            .chain(hierarchy.declared_fields(owner))
            .copied()
            .filter(|m| builder.graph().name(*m) == member)
            .collect();
        for tag in tag_set {
            for t in &targets {
                builder.tag_node(*t, tag)?;
            }
        }
        if targets.is_empty() {
            return Err(FrontendError::Profile(format!("`{sig}` names no member")));
        }
    }
    debug_assert!(builder
        .graph()
        .nodes_tagged(tags::STUB)
        .all(|n| n.span.is_none()));
    Ok(builder)
}

#[cfg(test)]
mod tests;
