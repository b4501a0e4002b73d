//! N-gram LM.
//!
//! ```text
//! lomt-lm v1 order=3 k=0.01 alpha=0 components=1
//! component weight=1.0 order=3 k=0.01 words=5 ngrams=9
//! <s>
//! </s>
//! <unk>
//! a
//! b
//! 4 3
//! 2 3 4
//! ...
//! ```
//!
//! Each component lists its symbol table (one per line, ids in line order)
//! followed by `count id...` records. Floats use the shortest round-trip
//! representation, so loading reproduces scores bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use lomt_core::lm::ComponentDump;
use lomt_core::NGramLM;

use super::{field, header, read_text, sha256_hex, write_text};
use crate::error::{Error, Result};

const MAGIC: &str = "lomt-lm";

pub fn format(lm: &NGramLM) -> String {
    let dumps = lm.dump();
    let mut out = format!(
        "{MAGIC} v1 order={} k={:?} alpha={:?} components={}\n",
        lm.order(),
        lm.smoothing(),
        lm.interp_alpha(),
        dumps.len()
    );
    for d in &dumps {
        let _ = writeln!(
            out,
            "component weight={:?} order={} k={:?} words={} ngrams={}",
            d.weight,
            d.order,
            d.k,
            d.words.len(),
            d.ngrams.len()
        );
        for w in &d.words {
            out.push_str(w);
            out.push('\n');
        }
        for (ids, n) in &d.ngrams {
            let _ = write!(out, "{n}");
            for id in ids {
                let _ = write!(out, " {id}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn hash(lm: &NGramLM) -> String {
    sha256_hex(format(lm).as_bytes())
}

pub fn parse(path: &Path, text: &str) -> Result<NGramLM> {
    let mut lines = text.lines().enumerate();
    let fields = header(path, lines.next().map(|l| l.1), MAGIC)?;
    let count: usize = field(path, 1, &fields, "components")?;
    let mut dumps = Vec::with_capacity(count);
    for _ in 0..count {
        let (i, line) = lines.next().ok_or_else(|| Error::format(path, 0, "truncated file"))?;
        let fields: Vec<(&str, &str)> = match line.strip_prefix("component ") {
            Some(rest) => rest.split_whitespace().filter_map(|w| w.split_once('=')).collect(),
            None => return Err(Error::format(path, i + 1, "expected a component header")),
        };
        let n_words: usize = field(path, i + 1, &fields, "words")?;
        let n_grams: usize = field(path, i + 1, &fields, "ngrams")?;
        let mut dump = ComponentDump {
            weight: field(path, i + 1, &fields, "weight")?,
            order: field(path, i + 1, &fields, "order")?,
            k: field(path, i + 1, &fields, "k")?,
            words: Vec::with_capacity(n_words),
            ngrams: Vec::with_capacity(n_grams),
        };
        for _ in 0..n_words {
            let (_, w) = lines.next().ok_or_else(|| Error::format(path, i + 1, "truncated symbol table"))?;
            dump.words.push(w.to_string());
        }
        for _ in 0..n_grams {
            let (j, rec) = lines.next().ok_or_else(|| Error::format(path, i + 1, "truncated n-gram records"))?;
            let bad = || Error::format(path, j + 1, "malformed n-gram record");
            let mut nums = rec.split(' ');
            let n: u64 = nums.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let ids = nums.map(|x| x.parse::<u32>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            dump.ngrams.push((ids, n));
        }
        dumps.push(dump);
    }
    if let Some((i, _)) = lines.next() {
        return Err(Error::format(path, i + 1, "trailing content"));
    }
    Ok(NGramLM::from_dump(dumps)?)
}

pub fn save(path: &Path, lm: &NGramLM) -> Result<String> {
    let text = format(lm);
    write_text(path, &text)?;
    Ok(sha256_hex(text.as_bytes()))
}

pub fn load(path: &Path) -> Result<NGramLM> {
    parse(path, &read_text(path)?)
}
