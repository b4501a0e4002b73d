//! Bitext mining from comparable documents: URL and content similarity,
//! greedy one-to-one document matching and sentence alignment with a lexical
//! model.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::tm::{LexModel, Translator, NULL};
use crate::vocab::FxSet;

/// Minimum probability for a table argmax to enter the dictionary.
pub const DICT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct WebDoc {
    pub url: String,
    pub lang: String,
    sentences: Vec<Sentence>,
}

impl WebDoc {
    /// Drops repeated and empty sentences, keeping first occurrences.
    pub fn new(url: &str, lang: &str, sentences: Vec<Sentence>) -> Result<Self> {
        if url.is_empty() {
            return Err(Error::InvalidParameter("document url is empty".into()));
        }
        let mut seen = FxSet::default();
        let sentences = sentences.into_iter().filter(|s| !s.is_empty() && seen.insert(s.clone())).collect();
        Ok(WebDoc { url: url.into(), lang: lang.into(), sentences })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocMatch {
    pub a: usize,
    pub b: usize,
    pub sim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceMatch {
    pub a: usize,
    pub b: usize,
    pub score: f64,
}

/// Character-level edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ca == cb { diag } else { 1 + diag.min(up).min(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// `1 - d(a, b) / max(|a|, |b|)`, 1 for two empty strings.
pub fn lev_sim(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Word-to-word translations used to bridge the two languages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: &str, to: &str) {
        self.map.entry(from.into()).or_default().insert(to.into());
    }

    /// Argmax translation of every source symbol whose best probability
    /// exceeds [`DICT_THRESHOLD`], collected from each model.
    pub fn from_models(models: &[&LexModel]) -> Self {
        let mut lex = Lexicon::new();
        for m in models {
            let mut best: BTreeMap<&str, (&str, f64)> = BTreeMap::new();
            for (s, t, p) in m.entries() {
                if s == NULL {
                    continue;
                }
                let e = best.entry(s).or_insert((t, p));
                if p > e.1 {
                    *e = (t, p);
                }
            }
            for (s, (t, p)) in best {
                if p > DICT_THRESHOLD {
                    lex.insert(s, t);
                }
            }
        }
        lex
    }

    pub fn translations(&self, word: &str) -> impl Iterator<Item = &str> + '_ {
        self.map.get(word).into_iter().flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        self.map.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn augmented<'a>(doc: &'a WebDoc, dict: &'a Lexicon) -> BTreeSet<&'a str> {
    let mut set = BTreeSet::new();
    for s in &doc.sentences {
        for w in s.iter() {
            set.insert(w.as_str());
            set.extend(dict.translations(w));
        }
    }
    set
}

/// Jaccard similarity of the documents' token sets, each augmented with the
/// dictionary translations of its own tokens. Two empty sets give 0.
pub fn jaccard(a: &WebDoc, b: &WebDoc, dict: &Lexicon) -> f64 {
    let sa = augmented(a, dict);
    let sb = augmented(b, dict);
    let inter = sa.intersection(&sb).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn doc_sim(a: &WebDoc, b: &WebDoc, dict: &Lexicon) -> f64 {
    lev_sim(&a.url, &b.url) * jaccard(a, b, dict)
}

/// Greedy one-to-one selection over scored `(i, j)` cells: best score first,
/// ties by lower `i` then lower `j`; a cell is taken when both ends are free
/// and its score is at least `threshold`.
fn greedy(mut cells: Vec<(usize, usize, f64)>, threshold: f64) -> Vec<(usize, usize, f64)> {
    cells.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let mut used_a = FxSet::default();
    let mut used_b = FxSet::default();
    let mut out = Vec::new();
    for (i, j, s) in cells {
        if s < threshold {
            break;
        }
        if !used_a.contains(&i) && !used_b.contains(&j) {
            used_a.insert(i);
            used_b.insert(j);
            out.push((i, j, s));
        }
    }
    out
}

/// Greedy bipartite matching over a similarity matrix (rows index the first
/// collection). Output is in acceptance order.
pub fn greedy_match(sims: &[Vec<f64>], threshold: f64) -> Result<Vec<(usize, usize)>> {
    let mut cells = Vec::new();
    for (i, row) in sims.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteScore);
            }
            cells.push((i, j, s));
        }
    }
    Ok(greedy(cells, threshold).into_iter().map(|(i, j, _)| (i, j)).collect())
}

/// Scores all document pairs and matches them greedily.
pub fn match_documents(a: &[WebDoc], b: &[WebDoc], dict: &Lexicon, threshold: f64) -> Vec<DocMatch> {
    let sims: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| doc_sim(x, y, dict)).collect()).collect();
    let cells = sims
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &s)| (i, j, s)))
        .collect();
    greedy(cells, threshold).into_iter().map(|(a, b, sim)| DocMatch { a, b, sim }).collect()
}

/// Per-token log-probability of `b` given `a` under `model` (which translates
/// `a`'s language into `b`'s).
pub fn pair_score(model: &dyn Translator, a: &Sentence, b: &Sentence) -> f64 {
    model.channel_score(b, a) / b.len().max(1) as f64
}

/// Scores every sentence pair across two matched documents and keeps a
/// greedy one-to-one selection with scores at least `floor`.
pub fn align_sentences(doc_a: &WebDoc, doc_b: &WebDoc, model: &dyn Translator, floor: f64) -> Vec<SentenceMatch> {
    let mut cells = vec![];
    for (i, a) in doc_a.sentences.iter().enumerate() {
        for (j, b) in doc_b.sentences.iter().enumerate() {
            cells.push((i, j, pair_score(model, a, b)));
        }
    }
    greedy(cells, floor).into_iter().map(|(a, b, score)| SentenceMatch { a, b, score }).collect()
}
