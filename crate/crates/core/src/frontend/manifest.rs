//! Manifest subset: package, requested permissions and broadcast receivers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::xml::{self, Element};
use super::{FrontendError, Location, Warning};

pub const MIN_PRIORITY: i64 = -1000;
pub const MAX_PRIORITY: i64 = 2_147_483_647;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestModel {
    pub package: String,
    /// Permission names with any `android.permission.` prefix removed.
    pub permissions: BTreeSet<String>,
    pub receivers: Vec<Receiver>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receiver {
    /// Simple type name: the part after the last `.` of the declared name.
    pub name: String,
    /// Highest intent-filter priority; 0 when none is declared.
    pub priority: i64,
}

pub(crate) fn normalize_permission(name: &str) -> &str {
    name.strip_prefix("android.permission.").unwrap_or(name)
}

fn simple_name(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

pub fn parse_manifest(path: &str, text: &str) -> Result<(ManifestModel, Vec<Warning>), FrontendError> {
    let root = xml::parse(path, text)?;
    let mut warnings = Vec::new();
    let mut unknown = |el: &Element| {
        warnings.push(Warning::emit(format!(
            "{}: ignoring unknown manifest element <{}>",
            Location::in_text(path, text, el.offset),
            el.name
        )));
    };
    if root.name != "manifest" {
        return Err(FrontendError::Xml {
            at: Location::in_text(path, text, root.offset),
            message: format!("expected <manifest>, found <{}>", root.name),
        });
    }
    let mut model = ManifestModel {
        package: root.attr("package").unwrap_or_default().to_owned(),
        ..ManifestModel::default()
    };
    for child in &root.children {
        match child.name.as_str() {
            "uses-permission" => match child.attr("name") {
                Some(name) => {
                    model.permissions.insert(normalize_permission(name).to_owned());
                }
                None => {
                    return Err(FrontendError::Xml {
                        at: Location::in_text(path, text, child.offset),
                        message: "<uses-permission> without a name".into(),
                    })
                }
            },
            "application" => {
                for comp in &child.children {
                    if comp.name != "receiver" {
                        unknown(comp);
                        continue;
                    }
                    let name = comp.attr("name").ok_or_else(|| FrontendError::Xml {
                        at: Location::in_text(path, text, comp.offset),
                        message: "<receiver> without a name".into(),
                    })?;
                    let mut priority: Option<i64> = None;
                    for filter in &comp.children {
                        if filter.name != "intent-filter" {
                            unknown(filter);
                            continue;
                        }
                        if let Some(p) = filter.attr("priority") {
                            let value: i64 = p.trim().parse().map_err(|_| FrontendError::Xml {
                                at: Location::in_text(path, text, filter.offset),
                                message: format!("priority `{p}` is not an integer"),
                            })?;
                            if !(MIN_PRIORITY..=MAX_PRIORITY).contains(&value) {
                                return Err(FrontendError::PriorityOutOfRange {
                                    receiver: name.to_owned(),
                                    priority: value,
                                });
                            }
                            priority = Some(priority.map_or(value, |p| p.max(value)));
                        }
                    }
                    model.receivers.push(Receiver {
                        name: simple_name(name).to_owned(),
                        priority: priority.unwrap_or(0),
                    });
                }
            }
            _ => unknown(child),
        }
    }
    Ok((model, warnings))
}
