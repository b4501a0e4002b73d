//! On-disk formats. Every artifact is plain UTF-8 text and every writer is
//! deterministic, so content hashes identify artifacts.

pub mod bpe;
pub mod config;
pub mod corpus;
pub mod datasets;
pub mod lm;
pub mod model;
pub mod nbest;
pub mod report;

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes a file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a file and checks its hash.
pub fn read_verified(path: &Path, expected: &str) -> Result<String> {
    let text = read_text(path)?;
    let found = sha256_hex(text.as_bytes());
    if found != expected {
        return Err(Error::HashMismatch { path: path.to_path_buf(), expected: expected.into(), found });
    }
    Ok(text)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|source| Error::Toml { path: path.to_path_buf(), source })
}

pub fn write_toml<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Internal(e.to_string()))?;
    write_text(path, &text)
}

/// Splits a header line into whitespace-separated `key=value` fields after
/// checking its magic word and version.
pub(crate) fn header<'a>(path: &Path, line: Option<&'a str>, magic: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let line = line.ok_or_else(|| Error::format(path, 1, "file is empty"))?;
    let mut words = line.split_whitespace();
    if words.next() != Some(magic) {
        return Err(Error::format(path, 1, format!("expected a {magic} header")));
    }
    if words.next() != Some("v1") {
        return Err(Error::format(path, 1, "unsupported format version"));
    }
    words
        .map(|w| w.split_once('=').ok_or_else(|| Error::format(path, 1, format!("malformed field {w:?}"))))
        .collect()
}

/// Value of `key` among header fields, parsed.
pub(crate) fn field<T: std::str::FromStr>(path: &Path, line: usize, fields: &[(&str, &str)], key: &str) -> Result<T> {
    let raw = fields
        .iter()
        .find(|f| f.0 == key)
        .map(|f| f.1)
        .ok_or_else(|| Error::format(path, line, format!("missing field {key}")))?;
    raw.parse().map_err(|_| Error::format(path, line, format!("bad value {raw:?} for {key}")))
}
