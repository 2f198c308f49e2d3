//! Permission map: permission → protected method signatures, with
//! protection levels and groups.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::manifest::normalize_permission;
use super::profile::split_signature;
use super::xml;
use super::{FrontendError, Location, Warning};

pub const PROTECTION_LEVELS: &[&str] = &["normal", "dangerous", "signature", "signatureOrSystem"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionEntry {
    pub methods: BTreeSet<String>,
    pub protection_level: Option<String>,
    pub group: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermissionMap {
    pub permissions: BTreeMap<String, PermissionEntry>,
}

impl PermissionMap {
    pub fn methods(&self, permission: &str) -> Option<&BTreeSet<String>> {
        self.permissions.get(normalize_permission(permission)).map(|e| &e.methods)
    }

    pub fn protection_level(&self, permission: &str) -> Option<&str> {
        self.permissions
            .get(normalize_permission(permission))
            .and_then(|e| e.protection_level.as_deref())
    }

    pub fn group(&self, permission: &str) -> Option<&str> {
        self.permissions
            .get(normalize_permission(permission))
            .and_then(|e| e.group.as_deref())
    }

    /// Permissions guarding `signature`, in name order.
    pub fn permissions_for(&self, signature: &str) -> Vec<&str> {
        self.permissions
            .iter()
            .filter(|(_, e)| e.methods.contains(signature))
            .map(|(p, _)| p.as_str())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.permissions.is_empty()
    }
}

/// Parses the permission-map XML. An empty or whitespace-only file is an
/// empty map. Repeated permissions produce a warning and have their method
/// sets merged.
pub fn parse_permission_map(path: &str, text: &str) -> Result<(PermissionMap, Vec<Warning>), FrontendError> {
    let mut map = PermissionMap::default();
    let mut warnings = Vec::new();
    if text.trim().is_empty() {
        return Ok((map, warnings));
    }
    let root = xml::parse(path, text)?;
    let at = |offset| Location::in_text(path, text, offset);
    if root.name != "permissionmap" {
        return Err(FrontendError::Xml {
            at: at(root.offset),
            message: format!("expected <permissionmap>, found <{}>", root.name),
        });
    }
    for perm in &root.children {
        if perm.name != "permission" {
            warnings.push(Warning::emit(format!("{}: ignoring <{}>", at(perm.offset), perm.name)));
            continue;
        }
        let name = perm.attr("name").ok_or_else(|| FrontendError::Xml {
            at: at(perm.offset),
            message: "<permission> without a name".into(),
        })?;
        let name = normalize_permission(name).to_owned();
        let level = perm.attr("protectionLevel").map(str::to_owned);
        if let Some(level) = &level {
            if !PROTECTION_LEVELS.contains(&level.as_str()) {
                return Err(FrontendError::InvalidProtectionLevel {
                    permission: name,
                    level: level.clone(),
                });
            }
        }
        let group = perm.attr("group").map(str::to_owned);
        let mut methods = BTreeSet::new();
        for m in &perm.children {
            if m.name != "method" {
                warnings.push(Warning::emit(format!("{}: ignoring <{}>", at(m.offset), m.name)));
                continue;
            }
            let sig = m.attr("signature").ok_or_else(|| FrontendError::Xml {
                at: at(m.offset),
                message: "<method> without a signature".into(),
            })?;
            split_signature(sig)?;
            methods.insert(sig.to_owned());
        }
        match map.permissions.get_mut(&name) {
            Some(existing) => {
                warnings.push(Warning::emit(format!(
                    "{}: permission `{name}` listed more than once; merging method sets",
                    at(perm.offset)
                )));
                existing.methods.extend(methods);
                existing.protection_level = existing.protection_level.take().or(level);
                existing.group = existing.group.take().or(group);
            }
            None => {
                map.permissions.insert(
                    name,
                    PermissionEntry {
                        methods,
                        protection_level: level,
                        group,
                    },
                );
            }
        }
    }
    Ok((map, warnings))
}
