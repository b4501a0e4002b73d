//! N-best interchange file: a `lomt-nbest v1` header, then one
//! tab-separated record per candidate:
//!
//! ```text
//! sentence-id  rank  hypothesis  fwd  channel  lm  combined
//! ```
//!
//! Ids and ranks are 0-based; unfilled scores are written as `-`. The
//! source sentences are not part of the file.

use std::fmt::Write as _;
use std::path::Path;

use lomt_core::{NBestEntry, NBestList, Sentence};

use super::{read_text, write_text};
use crate::error::{Error, Result};

const MAGIC: &str = "lomt-nbest v1";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:?}"))
}

pub fn format(lists: &[NBestList]) -> String {
    let mut out = format!("{MAGIC}\n");
    for (id, list) in lists.iter().enumerate() {
        for (rank, e) in list.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{id}\t{rank}\t{}\t{:?}\t{}\t{}\t{}",
                e.hypothesis,
                e.fwd,
                opt(e.channel),
                opt(e.lm),
                opt(e.combined)
            );
        }
    }
    out
}

/// Parses records and attaches `sources[id]` to each list. Every source
/// gets a list, possibly empty.
pub fn parse(path: &Path, text: &str, sources: &[Sentence]) -> Result<Vec<NBestList>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|l| l.1) != Some(MAGIC) {
        return Err(Error::format(path, 1, format!("expected a {MAGIC:?} header")));
    }
    let mut lists: Vec<NBestList> = sources.iter().map(|s| NBestList::new(s.clone(), Vec::new())).collect();
    for (i, line) in lines {
        let bad = |m: &str| Error::format(path, i + 1, m.to_string());
        let f: Vec<&str> = line.split('\t').collect();
        let [id, rank, hyp, fwd, ch, lm, comb] = f[..] else {
            return Err(bad("expected 7 tab-separated fields"));
        };
        let id: usize = id.parse().map_err(|_| bad("bad sentence id"))?;
        let rank: usize = rank.parse().map_err(|_| bad("bad rank"))?;
        let num = |s: &str| -> Result<Option<f64>> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad("bad score"))
            }
        };
        let list = lists.get_mut(id).ok_or_else(|| bad("sentence id has no source"))?;
        if rank != list.entries.len() {
            return Err(bad("ranks must be consecutive from 0"));
        }
        list.entries.push(NBestEntry {
            hypothesis: Sentence::parse(hyp),
            fwd: num(fwd)?.ok_or_else(|| bad("missing forward score"))?,
            channel: num(ch)?,
            lm: num(lm)?,
            combined: num(comb)?,
        });
    }
    Ok(lists)
}

pub fn save(path: &Path, lists: &[NBestList]) -> Result<()> {
    write_text(path, &format(lists))
}

pub fn load(path: &Path, sources: &[Sentence]) -> Result<Vec<NBestList>> {
    parse(path, &read_text(path)?, sources)
}
