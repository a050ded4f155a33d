//! `{{slot}}` substitution for the versioned text templates.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("missing slot {0:?}")]
    MissingSlot(String),
    #[error("unterminated slot at byte {0}")]
    Unterminated(usize),
}

/// Names of every slot in `template`, in order of first appearance.
pub fn slots(template: &str) -> Result<Vec<&str>, TemplateError> {
    let mut out: Vec<&str> = Vec::new();
    let mut rest = template;
    let mut base = 0;
    while let Some(start) = rest.find("{{") {
        let end = rest[start..]
            .find("}}")
            .ok_or(TemplateError::Unterminated(base + start))?;
        let name = rest[start + 2..start + end].trim();
        if !out.contains(&name) {
            out.push(name);
        }
        base += start + end + 2;
        rest = &rest[start + end + 2..];
    }
    Ok(out)
}

/// Replaces every `{{name}}` with its value. Returns the rendered text and the
/// set of slots that were used.
pub fn render(
    template: &str,
    values: &BTreeMap<String, String>,
) -> Result<(String, BTreeSet<String>), TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut used = BTreeSet::new();
    let mut rest = template;
    let mut base = 0;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let end = rest[start..]
            .find("}}")
            .ok_or(TemplateError::Unterminated(base + start))?;
        let name = rest[start + 2..start + end].trim();
        let value = values
            .get(name)
            .ok_or_else(|| TemplateError::MissingSlot(name.to_owned()))?;
        out.push_str(value);
        used.insert(name.to_owned());
        base += start + end + 2;
        rest = &rest[start + end + 2..];
    }
    out.push_str(rest);
    Ok((out, used))
}
