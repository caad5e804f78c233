//! Shared pieces of the on-disk and on-wire formats.
//!
//! Rights objects, ROAP messages, certificates and agent-store records are
//! all written as canonical `key=value` lines: keys sorted, one field per
//! line, binary values in standard base64. Canonical means two encodings of
//! the same value are byte-identical, which is what makes MACs and
//! signatures over these texts reproducible.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic at offset 0: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated {section} section at byte offset {offset}")]
    Truncated { section: &'static str, offset: usize },
    #[error("invalid UTF-8 in {section} section at byte offset {offset}")]
    InvalidUtf8 { section: &'static str, offset: usize },
    #[error("malformed container at byte offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("line {line}: expected `key=value`")]
    InvalidLine { line: usize },
    #[error("line {line}: duplicate field `{field}`")]
    DuplicateField { field: String, line: usize },
    #[error("line {line}: unknown field `{field}`")]
    UnknownField { field: String, line: usize },
    #[error("fields out of canonical order at line {line}")]
    NonCanonical { line: usize },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
}

pub(crate) fn b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

/// Ordered field set for one canonical text record.
#[derive(Debug, Default, Clone)]
pub(crate) struct Fields {
    map: BTreeMap<String, (String, usize)>,
}

impl Fields {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.map.insert(key.to_string(), (value.into(), 0));
        self
    }

    pub fn set_bytes(&mut self, key: &str, bytes: &[u8]) -> &mut Self {
        self.set(key, b64(bytes))
    }

    /// Canonical text of every field whose key passes `include`.
    pub fn render_filtered(&self, include: impl Fn(&str) -> bool) -> String {
        let mut out = String::new();
        for (k, (v, _)) in self.map.iter().filter(|(k, _)| include(k)) {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        self.render_filtered(|_| true)
    }

    /// Parses canonical text. Rejects duplicate keys, lines without `=`,
    /// keys not in `allowed`, and keys out of sorted order.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, FormatError> {
        let mut map = BTreeMap::new();
        let mut previous: Option<&str> = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let (key, value) = line.split_once('=').ok_or(FormatError::InvalidLine { line: line_no })?;
            if !allowed.contains(&key) {
                return Err(FormatError::UnknownField { field: key.to_string(), line: line_no });
            }
            if map.contains_key(key) {
                return Err(FormatError::DuplicateField { field: key.to_string(), line: line_no });
            }
            if previous.is_some_and(|p| p > key) {
                return Err(FormatError::NonCanonical { line: line_no });
            }
            previous = Some(key);
            map.insert(key.to_string(), (value.to_string(), line_no));
        }
        Ok(Self { map })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    /// Source line of `key`, or 0 for fields set in code.
    pub fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |(_, line)| *line)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, FormatError> {
        self.get(key).ok_or_else(|| FormatError::MissingField(key.to_string()))
    }

    pub fn require_bytes(&self, key: &str) -> Result<Vec<u8>, FormatError> {
        decode_b64(key, self.require(key)?)
    }

    pub fn optional_bytes(&self, key: &str) -> Result<Option<Vec<u8>>, FormatError> {
        self.get(key).map(|v| decode_b64(key, v)).transpose()
    }

    pub fn require_array<const N: usize>(&self, key: &str) -> Result<[u8; N], FormatError> {
        let bytes = self.require_bytes(key)?;
        let len = bytes.len();
        bytes.try_into().map_err(|_| FormatError::InvalidValue {
            field: key.to_string(),
            reason: format!("expected {N} bytes, got {len}"),
        })
    }

    pub fn require_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T, FormatError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e: T::Err| FormatError::InvalidValue { field: key.to_string(), reason: e.to_string() })
    }

    pub fn optional_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, FormatError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.require_parsed(key).map(Some),
        }
    }
}

fn decode_b64(key: &str, value: &str) -> Result<Vec<u8>, FormatError> {
    STANDARD.decode(value).map_err(|e| FormatError::InvalidValue { field: key.to_string(), reason: e.to_string() })
}

/// Identifiers appear as field values and as store file names.
pub(crate) fn validate_id(field: &str, id: &str) -> Result<(), FormatError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b':'));
    if ok {
        Ok(())
    } else {
        Err(FormatError::InvalidValue { field: field.to_string(), reason: format!("`{id}` is not a valid identifier") })
    }
}
