//! Platform profile: stub declarations for the platform API, profile tags
//! on stub members and entry-point names.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::miniapp::ast::{ClassDecl, FieldDecl, Ident, MethodDecl, Param, Span};
use super::FrontendError;
use crate::graph::tags;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct PlatformProfile {
    #[serde(default)]
    pub stubs: Vec<StubType>,
    /// `Type.member` → profile tags.
    #[serde(default)]
    pub tags: BTreeMap<String, BTreeSet<String>>,
    /// Either `Type.method` or a bare method name matched in every type.
    #[serde(default)]
    pub entry_points: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubType {
    #[serde(rename = "type")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extends: Option<String>,
    #[serde(default)]
    pub fields: Vec<StubField>,
    #[serde(default)]
    pub methods: Vec<StubMethod>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubField {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubMethod {
    pub name: String,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default = "void", skip_serializing_if = "is_void")]
    pub returns: String,
}

fn void() -> String {
    "void".into()
}

fn is_void(s: &str) -> bool {
    s == "void"
}

pub fn parse_profile(text: &str) -> Result<PlatformProfile, FrontendError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let profile: PlatformProfile = serde_path_to_error::deserialize(de).map_err(|e| FrontendError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    profile.validate()?;
    Ok(profile)
}

impl PlatformProfile {
    /// Checks that every tagged signature names a stub member and every
    /// tag is a profile tag.
    pub fn validate(&self) -> Result<(), FrontendError> {
        for (sig, tag_set) in &self.tags {
            let (ty, member) = split_signature(sig)?;
            let stub = self
                .stubs
                .iter()
                .find(|s| s.name == ty)
                .ok_or_else(|| FrontendError::Profile(format!("tagged signature `{sig}`: no stub type `{ty}`")))?;
            let exists =
                stub.methods.iter().any(|m| m.name == member) || stub.fields.iter().any(|f| f.name == member);
            if !exists {
                return Err(FrontendError::Profile(format!(
                    "tagged signature `{sig}`: `{ty}` has no member `{member}`"
                )));
            }
            for t in tag_set {
                if !tags::PROFILE_TAGS.contains(&t.as_str()) {
                    return Err(FrontendError::Profile(format!("`{sig}`: `{t}` is not a profile tag")));
                }
            }
        }
        for entry in &self.entry_points {
            if entry.contains('.') {
                split_signature(entry)?;
            } else if !is_identifier(entry) {
                return Err(FrontendError::Profile(format!("invalid entry point `{entry}`")));
            }
        }
        Ok(())
    }

    /// Stub types as bodiless class declarations.
    pub(crate) fn stub_classes(&self) -> Vec<ClassDecl> {
        let id = |text: &str| Ident {
            text: text.to_owned(),
            span: Span::default(),
        };
        self.stubs
            .iter()
            .map(|s| ClassDecl {
                name: id(&s.name),
                extends: s.extends.as_deref().map(id),
                fields: s
                    .fields
                    .iter()
                    .map(|f| FieldDecl {
                        ty: id(&f.ty),
                        name: id(&f.name),
                    })
                    .collect(),
                methods: s
                    .methods
                    .iter()
                    .map(|m| MethodDecl {
                        ret: id(&m.returns),
                        name: id(&m.name),
                        params: m
                            .params
                            .iter()
                            .enumerate()
                            .map(|(i, ty)| Param {
                                ty: id(ty),
                                name: id(&format!("p{i}")),
                            })
                            .collect(),
                        body: None,
                        span: Span::default(),
                    })
                    .collect(),
                span: Span::default(),
                stub: true,
            })
            .collect()
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits `Type.member`, rejecting anything else.
pub fn split_signature(sig: &str) -> Result<(&str, &str), FrontendError> {
    match sig.split_once('.') {
        Some((ty, member)) if is_identifier(ty) && is_identifier(member) => Ok((ty, member)),
        _ => Err(FrontendError::InvalidSignature(sig.to_owned())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROFILE: &str = r#"{
        "stubs": [
            {"type": "Object"},
            {"type": "SmsManager", "extends": "Object",
             "methods": [{"name": "sendTextMessage", "params": ["String", "String"]}]}
        ],
        "tags": {"SmsManager.sendTextMessage": ["SINK"]},
        "entryPoints": ["onCreate", "Main.run"]
    }"#;

    #[test]
    fn parses_and_converts_stubs() {
        let p = parse_profile(PROFILE).unwrap();
        let classes = p.stub_classes();
        assert_eq!(classes.len(), 2);
        assert!(classes.iter().all(|c| c.stub));
        let m = &classes[1].methods[0];
        assert_eq!(m.params[1].name.text, "p1");
        assert_eq!(m.ret.text, "void");
        assert!(m.body.is_none());
    }

    #[test]
    fn tag_on_missing_member_is_rejected() {
        let text = r#"{"stubs":[{"type":"A"}],"tags":{"A.m":["SINK"]}}"#;
        assert!(matches!(parse_profile(text), Err(FrontendError::Profile(_))));
    }

    #[test]
    fn unknown_tag_and_bad_signature_are_rejected() {
        let text = r#"{"stubs":[{"type":"A","methods":[{"name":"m"}]}],"tags":{"A.m":["STUB"]}}"#;
        assert!(matches!(parse_profile(text), Err(FrontendError::Profile(_))));
        let text = r#"{"tags":{"nodot":["SINK"]}}"#;
        assert!(matches!(parse_profile(text), Err(FrontendError::InvalidSignature(_))));
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let text = r#"{"stubs":[{"type":"A","methods":[{"name":3}]}]}"#;
        match parse_profile(text) {
            Err(FrontendError::Schema { path, .. }) => assert_eq!(path, "stubs[0].methods[0].name"),
            other => panic!("{other:?}"),
        }
    }
}
