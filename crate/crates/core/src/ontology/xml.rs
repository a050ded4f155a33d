//! A namespace-resolved element tree. RDF/XML is small enough here that
//! building the whole tree first keeps the mapping code simple.

use quick_xml::events::{BytesStart, Event};
use quick_xml::name::ResolveResult;
use quick_xml::NsReader;

use super::OntologyError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Name {
    pub ns: String,
    pub local: String,
}

impl Name {
    pub fn is(&self, ns: &str, local: &str) -> bool {
        self.ns == ns && self.local == local
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub name: Name,
    pub attrs: Vec<(Name, String)>,
    pub children: Vec<Node>,
    pub text: String,
    /// Byte offset of the start tag.
    pub offset: u64,
}

impl Node {
    pub fn attr(&self, ns: &str, local: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(n, _)| n.is(ns, local))
            .map(|(_, v)| v.as_str())
    }
}

fn malformed(offset: u64, message: impl Into<String>) -> OntologyError {
    OntologyError::MalformedXml {
        offset,
        message: message.into(),
    }
}

fn namespace(res: ResolveResult<'_>, offset: u64) -> Result<String, OntologyError> {
    match res {
        ResolveResult::Bound(ns) => Ok(String::from_utf8_lossy(ns.as_ref()).into_owned()),
        ResolveResult::Unbound => Ok(String::new()),
        ResolveResult::Unknown(prefix) => Err(malformed(
            offset,
            format!("undeclared prefix {}", String::from_utf8_lossy(&prefix)),
        )),
    }
}

fn element(
    reader: &NsReader<&[u8]>,
    ns: String,
    start: &BytesStart<'_>,
    offset: u64,
) -> Result<Node, OntologyError> {
    let local = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| malformed(offset, e.to_string()))?;
        let key = attr.key;
        if key.as_ref() == b"xmlns" || key.as_ref().starts_with(b"xmlns:") {
            continue;
        }
        let (res, local) = reader.resolve_attribute(key);
        let ns = namespace(res, offset)?;
        let value = attr
            .unescape_value()
            .map_err(|e| malformed(offset, e.to_string()))?;
        attrs.push((
            Name {
                ns,
                local: String::from_utf8_lossy(local.as_ref()).into_owned(),
            },
            value.into_owned(),
        ));
    }
    Ok(Node {
        name: Name { ns, local },
        attrs,
        children: Vec::new(),
        text: String::new(),
        offset,
    })
}

/// Parses `doc` into its root element. Errors carry the byte offset where
/// parsing failed; input ending inside an open element is reported at its end.
pub(crate) fn parse(doc: &str) -> Result<Node, OntologyError> {
    let mut reader = NsReader::from_reader(doc.as_bytes());
    reader.config_mut().check_end_names = true;
    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;
    let mut buf = Vec::new();
    loop {
        let offset = reader.buffer_position();
        buf.clear();
        let (ns, event) = match reader.read_resolved_event_into(&mut buf) {
            Ok((res, event)) => (namespace(res, offset)?, event.into_owned()),
            Err(e) => return Err(malformed(reader.error_position(), e.to_string())),
        };
        let finished = match event {
            Event::Start(e) => {
                stack.push(element(&reader, ns.clone(), &e, offset)?);
                None
            }
            Event::Empty(e) => Some(element(&reader, ns.clone(), &e, offset)?),
            Event::End(_) => stack.pop(),
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| malformed(offset, e.to_string()))?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&text),
                    None if text.trim().is_empty() => {}
                    None => return Err(malformed(offset, "text outside the root element")),
                }
                None
            }
            Event::CData(c) => {
                let text = String::from_utf8_lossy(&c).into_owned();
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&text),
                    None => return Err(malformed(offset, "CDATA outside the root element")),
                }
                None
            }
            Event::Eof => {
                if let Some(open) = stack.last() {
                    return Err(malformed(
                        doc.len() as u64,
                        format!("input ends inside element {}", open.name.local),
                    ));
                }
                break;
            }
            _ => None,
        };
        if let Some(node) = finished {
            match stack.last_mut() {
                Some(parent) => parent.children.push(node),
                None if root.is_none() => root = Some(node),
                None => return Err(malformed(offset, "more than one root element")),
            }
        }
    }
    root.ok_or_else(|| malformed(doc.len() as u64, "no root element"))
}
