//! Stanza-based control-file format.
//!
//! The same grammar carries package indices, the ledger, the repository
//! configuration and the release calendar. A stanza is a run of
//! `Name: value` lines; stanzas are separated by blank lines and a line
//! starting with a space or tab continues the previous value.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Deb822Error {
    #[error("MalformedField: line {line}: {reason}")]
    MalformedField { line: usize, reason: &'static str },
    #[error("DuplicateField: line {line}: field {name:?} already present in this stanza")]
    DuplicateField { line: usize, name: String },
    #[error("InvalidFieldName: {0:?}")]
    InvalidFieldName(String),
    #[error("InvalidValue: field {name:?}: {reason}")]
    InvalidValue { name: String, reason: &'static str },
    #[error("NotUtf8: line {line}")]
    NotUtf8 { line: usize },
}

/// One paragraph of `Name: value` fields, in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stanza {
    fields: Vec<(String, String)>,
}

impl Stanza {
    pub fn new() -> Self {
        Self::default()
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Appends a field, or replaces the value of an existing one (keeping
    /// its position and original casing).
    pub fn set(&mut self, name: impl Into<String>, value: impl Into<String>) {
        let name = name.into();
        let value = value.into();
        match self.fields.iter_mut().find(|(n, _)| n.eq_ignore_ascii_case(&name)) {
            Some(slot) => slot.1 = value,
            None => self.fields.push((name, value)),
        }
    }

    /// Builder form of [`Stanza::set`].
    pub fn with(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.set(name, value);
        self
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &str)> {
        self.fields.iter().map(|(n, v)| (n.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Checks the invariants that [`serialize_stanzas`] relies on.
    pub fn validate(&self) -> Result<(), Deb822Error> {
        for (i, (name, value)) in self.fields.iter().enumerate() {
            if !is_valid_field_name(name) {
                return Err(Deb822Error::InvalidFieldName(name.clone()));
            }
            if self.fields[..i].iter().any(|(n, _)| n.eq_ignore_ascii_case(name)) {
                return Err(Deb822Error::InvalidFieldName(name.clone()));
            }
            validate_value(name, value)?;
        }
        Ok(())
    }
}

impl<N: Into<String>, V: Into<String>> FromIterator<(N, V)> for Stanza {
    fn from_iter<T: IntoIterator<Item = (N, V)>>(iter: T) -> Self {
        let mut stanza = Stanza::new();
        for (n, v) in iter {
            stanza.set(n, v);
        }
        stanza
    }
}

impl fmt::Display for Stanza {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_stanza(f, self)
    }
}

/// `[!-9;-~]+`, and not starting with `#` (which would read back as a comment).
pub fn is_valid_field_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('#')
        && !name.starts_with('-')
        && name.bytes().all(|b| matches!(b, b'!'..=b'9' | b';'..=b'~'))
}

fn validate_value(name: &str, value: &str) -> Result<(), Deb822Error> {
    let bad = |reason| {
        Err(Deb822Error::InvalidValue {
            name: name.to_string(),
            reason,
        })
    };
    if value.contains('\0') {
        return bad("contains NUL");
    }
    if value.contains('\r') {
        return bad("contains carriage return");
    }
    let mut lines = value.split('\n');
    let first = lines.next().unwrap_or("");
    if first.starts_with([' ', '\t']) {
        return bad("first line starts with whitespace");
    }
    for line in lines {
        if line == "." {
            return bad("continuation line \".\" cannot be represented");
        }
        if !line.is_empty() && line.trim_matches([' ', '\t']).is_empty() {
            return bad("whitespace-only continuation line");
        }
    }
    Ok(())
}

fn is_blank(line: &str) -> bool {
    line.trim_matches([' ', '\t']).is_empty()
}

/// Parses zero or more stanzas.
pub fn parse_stanzas(text: &str) -> Result<Vec<Stanza>, Deb822Error> {
    let mut stanzas = Vec::new();
    let mut current = Stanza::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if is_blank(line) {
            if !current.is_empty() {
                stanzas.push(std::mem::take(&mut current));
            }
            continue;
        }

        if line.starts_with('#') {
            return Err(Deb822Error::MalformedField {
                line: line_no,
                reason: "comment lines are not allowed",
            });
        }

        if line.starts_with([' ', '\t']) {
            let Some(last) = current.fields.last_mut() else {
                return Err(Deb822Error::MalformedField {
                    line: line_no,
                    reason: "continuation line without a preceding field",
                });
            };
            let content = &line[1..];
            last.1.push('\n');
            if content != "." {
                last.1.push_str(content);
            }
            continue;
        }

        let Some((name, value)) = line.split_once(':') else {
            return Err(Deb822Error::MalformedField {
                line: line_no,
                reason: "expected `Name: value`",
            });
        };
        if !is_valid_field_name(name) {
            return Err(Deb822Error::MalformedField {
                line: line_no,
                reason: "invalid field name",
            });
        }
        if value.contains('\0') {
            return Err(Deb822Error::MalformedField {
                line: line_no,
                reason: "value contains NUL",
            });
        }
        if current.contains(name) {
            return Err(Deb822Error::DuplicateField {
                line: line_no,
                name: name.to_string(),
            });
        }
        current
            .fields
            .push((name.to_string(), value.trim_start_matches([' ', '\t']).to_string()));
    }

    if !current.is_empty() {
        stanzas.push(current);
    }
    Ok(stanzas)
}

/// Byte-level entry point; rejects invalid UTF-8 with the offending line.
pub fn parse_stanzas_bytes(bytes: &[u8]) -> Result<Vec<Stanza>, Deb822Error> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_stanzas(text),
        Err(e) => {
            let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            Err(Deb822Error::NotUtf8 { line })
        }
    }
}

fn write_stanza(out: &mut impl fmt::Write, stanza: &Stanza) -> fmt::Result {
    for (name, value) in &stanza.fields {
        let mut lines = value.split('\n');
        let first = lines.next().unwrap_or("");
        if first.is_empty() {
            writeln!(out, "{name}:")?;
        } else {
            writeln!(out, "{name}: {first}")?;
        }
        for line in lines {
            if line.is_empty() {
                out.write_str(" .\n")?;
            } else {
                writeln!(out, " {line}")?;
            }
        }
    }
    Ok(())
}

/// Renders stanzas separated by a single blank line. Always LF.
pub fn serialize_stanzas(stanzas: &[Stanza]) -> Result<String, Deb822Error> {
    let mut out = String::new();
    for (i, stanza) in stanzas.iter().enumerate() {
        stanza.validate()?;
        if i > 0 {
            out.push('\n');
        }
        write_stanza(&mut out, stanza).expect("writing to a String cannot fail");
    }
    Ok(out)
}
