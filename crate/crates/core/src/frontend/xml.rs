//! Minimal element tree on top of quick-xml, shared by the XML front ends.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{FrontendError, Location};

/// Nesting bound; deeper documents are rejected instead of risking the stack.
const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    /// Local name with any namespace prefix removed.
    pub name: String,
    /// Attributes in document order, keys with namespace prefixes removed.
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub offset: usize,
}

impl Element {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn local(name: &str) -> String {
    name.rsplit(':').next().unwrap_or(name).to_owned()
}

fn start(path: &str, text: &str, e: &BytesStart<'_>, offset: usize) -> Result<Element, FrontendError> {
    let mut attrs = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| FrontendError::Xml {
            at: Location::in_text(path, text, offset),
            message: err.to_string(),
        })?;
        let value = a
            .normalized_value(quick_xml::XmlVersion::Implicit1_0)
            .map_err(|err| FrontendError::Xml {
                at: Location::in_text(path, text, offset),
                message: err.to_string(),
            })?;
        attrs.push((local(a.key.as_ref()), value.into_owned()));
    }
    Ok(Element {
        name: local(e.name().as_ref()),
        attrs,
        children: Vec::new(),
        offset,
    })
}

/// Parses `text` into its root element.
pub fn parse(path: &str, text: &str) -> Result<Element, FrontendError> {
    let mut reader = Reader::from_str(text);
    let config = reader.config_mut();
    config.check_end_names = true;
    config.trim_text(true);
    let err = |offset: usize, message: String| FrontendError::Xml {
        at: Location::in_text(path, text, offset),
        message,
    };
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| err(reader.error_position() as usize, e.to_string()))?;
        match event {
            Event::Start(e) => {
                if root.is_some() {
                    return Err(err(offset, "content after the root element".into()));
                }
                if stack.len() >= MAX_DEPTH {
                    return Err(err(offset, "elements nested too deeply".into()));
                }
                stack.push(start(path, text, &e, offset)?);
            }
            Event::Empty(e) => {
                let el = start(path, text, &e, offset)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => return Err(err(offset, "content after the root element".into())),
                }
            }
            Event::End(_) => {
                let el = stack.pop().ok_or_else(|| err(offset, "unexpected closing tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                if stack.is_empty() && !t.trim().is_empty() {
                    return Err(err(offset, "text outside the root element".into()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(err(open.offset, format!("unclosed element `{}`", open.name)));
    }
    root.ok_or_else(|| err(0, "document has no root element".into()))
}
