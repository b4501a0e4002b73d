//! Lexical translation model: an IBM Model 1 table trained by EM, decoded
//! with a windowed monotone beam search under a target n-gram LM.

pub(crate) mod decode;
mod train;

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

pub use train::{em_train, Ibm1};

use crate::corpus::{Direction, Sentence};
use crate::error::{Error, Result};
use crate::lm::{LmIndex, NGramLM};
use crate::math::ln;
use crate::rerank::{NBestEntry, NBestList};
use crate::vocab::{FxMap, Vocab};
use decode::{Lattice, Scorer, MAX_WINDOW};

/// Source symbol standing for "aligned to nothing".
pub const NULL: &str = "<null>";
/// Probability used when a pair has no table entry.
pub const FLOOR: f64 = 1e-9;

/// Anything that can produce n-best lists and score pairs in the reverse
/// direction: single models and ensembles.
pub trait Translator: Send + Sync {
    fn direction(&self) -> Direction;

    /// Top-`n` translations of `x`, best first.
    fn nbest(&self, x: &Sentence, n: usize) -> Result<NBestList>;

    /// `ln P(x | y)` under this model read as a channel model, i.e. `y` is in
    /// this model's input language and `x` in its output language.
    fn channel_score(&self, x: &Sentence, y: &Sentence) -> f64;

    /// Language model used for the target side.
    fn lm(&self) -> &NGramLM;
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderSettings {
    pub beam: usize,
    /// Reordering radius.
    pub window: usize,
    pub lm_weight: f64,
    /// Candidate targets kept per source symbol.
    pub max_options: Option<usize>,
    /// Divide reported scores by `len + 1`.
    pub length_norm: bool,
}

impl Default for DecoderSettings {
    fn default() -> Self {
        DecoderSettings { beam: 5, window: 1, lm_weight: 1.0, max_options: Some(8), length_norm: false }
    }
}

impl DecoderSettings {
    pub fn validate(&self) -> Result<()> {
        if self.beam == 0 {
            return Err(Error::InvalidBeam);
        }
        if self.window > MAX_WINDOW {
            return Err(Error::InvalidWindow(self.window));
        }
        if !(self.lm_weight >= 0.0 && self.lm_weight.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("lm_weight {}", self.lm_weight)));
        }
        if self.max_options == Some(0) {
            return Err(Error::InvalidParameter("max_options must be positive".to_owned()));
        }
        Ok(())
    }
}

/// A directional lexical translation model.
#[derive(Clone, Debug, PartialEq)]
pub struct LexModel {
    direction: Direction,
    settings: DecoderSettings,
    /// Sorted, with [`NULL`] at id 0.
    src: Vocab,
    /// Sorted, so id order is string order.
    tgt: Vocab,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    probs: Vec<f64>,
    options: Vec<Vec<(u32, f64)>>,
    lm: Arc<NGramLM>,
    lm_index: LmIndex,
    tag_bias: BTreeMap<String, BTreeMap<String, f64>>,
    bias_ids: BTreeMap<String, FxMap<u32, f64>>,
}

impl LexModel {
    /// Builds a model from `(source, target, t(target | source))` entries.
    /// Entries with non-positive probability are ignored.
    pub fn from_entries<I>(
        direction: Direction,
        entries: I,
        lm: Arc<NGramLM>,
        settings: DecoderSettings,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        settings.validate()?;
        let entries: Vec<(String, String, f64)> =
            entries.into_iter().filter(|e| e.2 > 0.0 && e.2.is_finite()).collect();
        let mut src_words: Vec<&str> =
            entries.iter().map(|e| e.0.as_str()).filter(|w| *w != NULL).collect();
        src_words.sort_unstable();
        src_words.dedup();
        let mut tgt_words: Vec<&str> = entries.iter().map(|e| e.1.as_str()).collect();
        tgt_words.sort_unstable();
        tgt_words.dedup();
        if tgt_words.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let src = Vocab::from_words(
            core::iter::once(NULL.to_owned()).chain(src_words.into_iter().map(str::to_owned)),
        );
        let tgt = Vocab::from_words(tgt_words.into_iter().map(str::to_owned));
        let mut rows: Vec<Vec<(u32, f64)>> = alloc::vec![Vec::new(); src.len()];
        for (s, t, p) in &entries {
            let (Some(si), Some(ti)) = (src.get(s), tgt.get(t)) else { unreachable!() };
            rows[si as usize].push((ti, *p));
        }
        let mut row_ptr = Vec::with_capacity(src.len() + 1);
        let mut cols = Vec::with_capacity(entries.len());
        let mut probs = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable_by_key(|e| e.0);
            row.dedup_by_key(|e| e.0);
            for &(t, p) in row.iter() {
                cols.push(t);
                probs.push(p);
            }
            row_ptr.push(cols.len());
        }
        let lm_index = lm.index(tgt.words());
        let mut model = LexModel {
            direction,
            settings,
            src,
            tgt,
            row_ptr,
            cols,
            probs,
            options: Vec::new(),
            lm,
            lm_index,
            tag_bias: BTreeMap::new(),
            bias_ids: BTreeMap::new(),
        };
        model.rebuild_options();
        Ok(model)
    }

    fn rebuild_options(&mut self) {
        let cap = self.settings.max_options.unwrap_or(usize::MAX);
        self.options = (0..self.src.len())
            .map(|s| {
                let (lo, hi) = (self.row_ptr[s], self.row_ptr[s + 1]);
                let mut row: Vec<(u32, f64)> =
                    (lo..hi).map(|k| (self.cols[k], self.probs[k])).collect();
                row.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                row.truncate(cap);
                row.into_iter().map(|(t, p)| (t, ln(p))).collect()
            })
            .collect();
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn settings(&self) -> &DecoderSettings {
        &self.settings
    }

    pub fn with_settings(mut self, settings: DecoderSettings) -> Result<Self> {
        settings.validate()?;
        let rebuild = settings.max_options != self.settings.max_options;
        self.settings = settings;
        if rebuild {
            self.rebuild_options();
        }
        Ok(self)
    }

    pub fn lm(&self) -> &NGramLM {
        &self.lm
    }

    pub fn lm_handle(&self) -> &Arc<NGramLM> {
        &self.lm
    }

    /// Replaces the target LM, keeping the table and settings.
    pub fn with_lm(mut self, lm: Arc<NGramLM>) -> Self {
        self.lm_index = lm.index(self.tgt.words());
        self.lm = lm;
        self
    }

    /// Additive per-tag biases on target symbols, applied when a source
    /// sentence starts with the tag.
    pub fn with_tag_bias(mut self, bias: BTreeMap<String, BTreeMap<String, f64>>) -> Self {
        self.bias_ids = bias
            .iter()
            .map(|(tag, row)| {
                let ids = row.iter().filter_map(|(w, b)| Some((self.tgt.get(w)?, *b))).collect();
                (tag.clone(), ids)
            })
            .collect();
        self.tag_bias = bias;
        self
    }

    pub fn tag_bias(&self) -> &BTreeMap<String, BTreeMap<String, f64>> {
        &self.tag_bias
    }

    pub fn source_vocab(&self) -> &[String] {
        &self.src.words()[1..]
    }

    pub fn target_vocab(&self) -> &[String] {
        self.tgt.words()
    }

    /// All table entries, ordered by source then target symbol.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        (0..self.src.len()).flat_map(move |s| {
            (self.row_ptr[s]..self.row_ptr[s + 1]).map(move |k| {
                (self.src.word(s as u32), self.tgt.word(self.cols[k]), self.probs[k])
            })
        })
    }

    /// Row used for a source token; unknown tokens fall back to the NULL row.
    fn row(&self, token: &str) -> u32 {
        self.src.get(token).unwrap_or(0)
    }

    fn prob_ids(&self, s: u32, t: u32) -> f64 {
        let (lo, hi) = (self.row_ptr[s as usize], self.row_ptr[s as usize + 1]);
        match self.cols[lo..hi].binary_search(&t) {
            Ok(k) => self.probs[lo + k],
            Err(_) => 0.0,
        }
    }

    /// `t(target | source)`, zero for pairs without an entry.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        match self.tgt.get(target) {
            Some(t) => self.prob_ids(self.row(source), t),
            None => 0.0,
        }
    }

    /// Candidate targets for a source token with their log-probabilities, best first.
    pub fn options(&self, source: &str) -> Vec<(&str, f64)> {
        self.options[self.row(source) as usize].iter().map(|&(t, lp)| (self.tgt.word(t), lp)).collect()
    }

    /// IBM Model 1 log-likelihood of `target` given `source`, NULL included:
    /// `Σ_j ln((1/(l+1)) Σ_i t(target_j | source_i))`. Leading tags are ignored.
    pub fn log_marginal(&self, source: &Sentence, target: &Sentence) -> f64 {
        let src = source.split_tags().1;
        let rows: Vec<u32> =
            core::iter::once(0).chain(src.iter().map(|w| self.row(w))).collect();
        marginal(target.split_tags().1, rows.len(), |i, y| match self.tgt.get(y) {
            Some(t) => self.prob_ids(rows[i], t),
            None => 0.0,
        })
    }

    fn bias_for(&self, tag: Option<&str>) -> Option<&FxMap<u32, f64>> {
        tag.and_then(|t| self.bias_ids.get(t)).filter(|m| !m.is_empty())
    }

    fn lattice(&self, content: &[String], bias: Option<&FxMap<u32, f64>>) -> Lattice {
        Lattice {
            options: content
                .iter()
                .map(|w| {
                    let opts = &self.options[self.row(w) as usize];
                    match bias {
                        None => opts.clone(),
                        Some(b) => opts
                            .iter()
                            .map(|&(t, lp)| (t, b.get(&t).map_or(lp, |v| lp + v)))
                            .collect(),
                    }
                })
                .collect(),
        }
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer { lm: &self.lm, index: &self.lm_index, lm_weight: self.settings.lm_weight }
    }

    fn report(&self, score: f64, len: usize) -> f64 {
        if self.settings.length_norm {
            score / (len + 1) as f64
        } else {
            score
        }
    }

    /// Beam search with width `max(beam, n)`.
    pub fn translate_nbest(&self, x: &Sentence, n: usize) -> Result<NBestList> {
        if n == 0 {
            return Err(Error::InvalidNBest);
        }
        let (tag, content) = x.split_tags();
        if content.is_empty() {
            return Err(Error::EmptySentence);
        }
        let lattice = self.lattice(content, self.bias_for(tag));
        let width = self.settings.beam.max(n);
        let hyps = decode::beam_search(&lattice, &self.scorer(), self.settings.window, width, n);
        if hyps.is_empty() {
            return Err(Error::NoAlignment(self.settings.window));
        }
        let entries = hyps
            .into_iter()
            .map(|h| {
                let words = h.tokens.iter().map(|&t| self.tgt.word(t).to_owned()).collect();
                NBestEntry::new(Sentence::new(words), self.report(h.score, content.len()))
            })
            .collect();
        Ok(NBestList::new(x.clone(), entries))
    }

    /// Score of the best admissible alignment of `y` to `x` under the decoder's
    /// scoring function. Equals the score the decoder reports for `y`.
    pub fn pair_logprob(&self, x: &Sentence, y: &Sentence) -> Result<f64> {
        let (tag, src) = x.split_tags();
        let tgt = y.split_tags().1;
        if src.len() != tgt.len() {
            return Err(Error::LengthMismatch { source_len: src.len(), target: tgt.len() });
        }
        if src.is_empty() {
            return Err(Error::EmptySentence);
        }
        let bias = self.bias_for(tag);
        let ids: Vec<u32> =
            tgt.iter().map(|w| self.tgt.get(w).unwrap_or(crate::lm::UNKNOWN_SYMBOL)).collect();
        let rows: Vec<u32> = src.iter().map(|w| self.row(w)).collect();
        let score = decode::forced_score(src.len(), &ids, &self.scorer(), self.settings.window, |pos, i| {
            let t = ids[i];
            let p = if t == crate::lm::UNKNOWN_SYMBOL { 0.0 } else { self.prob_ids(rows[pos], t) };
            let lp = if p > 0.0 { ln(p) } else { ln(FLOOR) };
            match bias.and_then(|b| b.get(&t)) {
                Some(v) => lp + v,
                None => lp,
            }
        })
        .ok_or(Error::NoAlignment(self.settings.window))?;
        Ok(self.report(score, src.len()))
    }
}

/// `Σ_j ln(max(Σ_i t(y_j, i), FLOOR) / rows)`.
pub(crate) fn marginal<F>(target: &[String], rows: usize, mut t: F) -> f64
where
    F: FnMut(usize, &str) -> f64,
{
    let mut total = 0.0;
    for y in target {
        let mut sum = 0.0;
        for i in 0..rows {
            sum += t(i, y);
        }
        total += ln(sum.max(FLOOR) / rows as f64);
    }
    total
}

impl Translator for LexModel {
    fn direction(&self) -> Direction {
        self.direction
    }

    fn nbest(&self, x: &Sentence, n: usize) -> Result<NBestList> {
        self.translate_nbest(x, n)
    }

    fn channel_score(&self, x: &Sentence, y: &Sentence) -> f64 {
        self.log_marginal(y, x)
    }

    fn lm(&self) -> &NGramLM {
        &self.lm
    }
}

#[cfg(test)]
mod tests;
