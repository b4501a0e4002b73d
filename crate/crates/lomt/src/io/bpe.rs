//! BPE merge list.
//!
//! ```text
//! lomt-bpe v1 vocab_size=14 joiner=@@ reserved=<x> reserved=<y>
//! l o
//! lo w
//! ```
//!
//! One merge per line in learned order.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use lomt_core::BpeModel;

use super::{field, header, read_text, write_text};
use crate::error::{Error, Result};

const MAGIC: &str = "lomt-bpe";

pub fn format(model: &BpeModel) -> String {
    let mut out = format!("{MAGIC} v1 vocab_size={} joiner={}", model.vocab_size(), model.joiner());
    for r in model.reserved() {
        let _ = write!(out, " reserved={r}");
    }
    out.push('\n');
    for (l, r) in model.merges() {
        let _ = writeln!(out, "{l} {r}");
    }
    out
}

pub fn parse(path: &Path, text: &str) -> Result<BpeModel> {
    let mut lines = text.lines();
    let fields = header(path, lines.next(), MAGIC)?;
    let vocab_size: usize = field(path, 1, &fields, "vocab_size")?;
    let joiner: String = field(path, 1, &fields, "joiner")?;
    let reserved: BTreeSet<String> = fields.iter().filter(|f| f.0 == "reserved").map(|f| f.1.to_string()).collect();
    let mut merges = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => merges.push((l.to_string(), r.to_string())),
            _ => return Err(Error::format(path, i + 2, "expected \"left right\"")),
        }
    }
    Ok(BpeModel::from_parts(merges, vocab_size, joiner, reserved)?)
}

pub fn save(path: &Path, model: &BpeModel) -> Result<()> {
    write_text(path, &format(model))
}

pub fn load(path: &Path) -> Result<BpeModel> {
    parse(path, &read_text(path)?)
}
