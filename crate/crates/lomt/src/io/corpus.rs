//! Monolingual (one sentence per line) and parallel (`source<TAB>target`)
//! corpus files.

use std::fmt::Write as _;
use std::path::Path;

use lomt_core::corpus::{parse_corpus, DatasetData, LoadReport};
use lomt_core::{Pair, Sentence, Side};

use super::{read_text, write_text};
use crate::error::{Error, Result};

pub fn read_corpus(path: &Path, side: Side) -> Result<(DatasetData, LoadReport)> {
    let text = read_text(path)?;
    parse_corpus(&text, side).map_err(|e| match e {
        lomt_core::Error::MalformedParallelLine { line, found } => {
            Error::format(path, line, format!("expected exactly one tab, found {found}"))
        }
        other => other.into(),
    })
}

pub fn read_pairs(path: &Path) -> Result<Vec<Pair>> {
    match read_corpus(path, Side::Parallel)?.0 {
        DatasetData::Parallel(p) => Ok(p),
        _ => unreachable!(),
    }
}

pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    match read_corpus(path, Side::MonoSource)?.0 {
        DatasetData::MonoSource(s) => Ok(s),
        _ => unreachable!(),
    }
}

/// Every sentence of a file: both sides of tab-separated lines, whole lines
/// otherwise.
pub fn read_any(path: &Path) -> Result<Vec<Sentence>> {
    let text = read_text(path)?;
    Ok(text
        .lines()
        .flat_map(|l| l.split('\t'))
        .map(Sentence::parse)
        .filter(|s| !s.is_empty())
        .collect())
}

pub fn format_pairs(pairs: &[Pair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}", p.source, p.target);
    }
    out
}

pub fn format_sentences(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "{s}");
    }
    out
}

pub fn write_pairs(path: &Path, pairs: &[Pair]) -> Result<()> {
    write_text(path, &format_pairs(pairs))
}

pub fn write_sentences(path: &Path, sentences: &[Sentence]) -> Result<()> {
    write_text(path, &format_sentences(sentences))
}

/// Canonical text of any dataset payload, used for hashing.
pub fn format_data(data: &DatasetData) -> String {
    match data {
        DatasetData::Parallel(p) => format_pairs(p),
        DatasetData::MonoSource(s) | DatasetData::MonoTarget(s) => format_sentences(s),
    }
}
