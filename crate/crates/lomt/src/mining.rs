//! Document collections for bitext mining.
//!
//! A collection is an index file of `lang<TAB>url<TAB>file` lines; each file
//! holds one tokenized sentence per line and paths are relative to the index.

use std::fmt::Write as _;
use std::path::Path;

use lomt_core::mine::{align_sentences, match_documents, Lexicon, WebDoc};
use lomt_core::{LexModel, Pair};

use crate::error::{Error, Result};
use crate::io::corpus::read_sentences;
use crate::io::read_text;

pub fn read_collection(index: &Path) -> Result<Vec<WebDoc>> {
    let base = index.parent().unwrap_or(Path::new("."));
    let mut docs = Vec::new();
    for (i, line) in read_text(index)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [lang, url, file] = f[..] else {
            return Err(Error::format(index, i + 1, "expected \"lang<TAB>url<TAB>file\""));
        };
        docs.push(WebDoc::new(url, lang, read_sentences(&base.join(file))?)?);
    }
    Ok(docs)
}

/// One mined sentence pair with where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Mined {
    pub pair: Pair,
    pub url_a: String,
    pub url_b: String,
    pub doc_sim: f64,
    pub score: f64,
}

/// Matches `source_lang` documents to `target_lang` documents and aligns
/// sentences within every matched pair with the forward model.
pub fn mine(
    docs: &[WebDoc],
    source_lang: &str,
    target_lang: &str,
    model: &LexModel,
    threshold: f64,
    floor: f64,
) -> Vec<Mined> {
    let a: Vec<WebDoc> = docs.iter().filter(|d| d.lang == source_lang).cloned().collect();
    let b: Vec<WebDoc> = docs.iter().filter(|d| d.lang == target_lang).cloned().collect();
    let dict = Lexicon::from_models(&[model]);
    let mut out = Vec::new();
    for m in match_documents(&a, &b, &dict, threshold) {
        let (da, db) = (&a[m.a], &b[m.b]);
        for s in align_sentences(da, db, model, floor) {
            out.push(Mined {
                pair: Pair::new(da.sentences()[s.a].clone(), db.sentences()[s.b].clone()),
                url_a: da.url.clone(),
                url_b: db.url.clone(),
                doc_sim: m.sim,
                score: s.score,
            });
        }
    }
    out
}

/// `url_a<TAB>url_b<TAB>doc_sim<TAB>score`, one line per mined pair.
pub fn format_scores(mined: &[Mined]) -> String {
    let mut out = String::new();
    for m in mined {
        let _ = writeln!(out, "{}\t{}\t{:?}\t{:?}", m.url_a, m.url_b, m.doc_sim, m.score);
    }
    out
}
