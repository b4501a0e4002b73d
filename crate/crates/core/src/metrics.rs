//! Corpus BLEU-4 and system evaluation.
//!
//! Orders whose hypothesis n-gram total is zero are left out of the geometric
//! mean. An order with a positive total but no matches uses precision
//! `1 / (2 · total)`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Pair, Sentence};
use crate::error::{Error, Result};
use crate::math::{exp, ln};
use crate::rerank::{translate_corpus, DecodeMode};
use crate::subword::{BpeModel, DetokPolicy};
use crate::tm::Translator;
use crate::vocab::FxMap;

pub const MAX_N: usize = 4;

/// Sufficient statistics for corpus BLEU.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_N],
    pub totals: [u64; MAX_N],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn sentence(hyp: &[String], reference: &[String]) -> Self {
        let mut s = BleuStats { hyp_len: hyp.len() as u64, ref_len: reference.len() as u64, ..Default::default() };
        for n in 1..=MAX_N {
            if hyp.len() < n {
                continue;
            }
            s.totals[n - 1] = (hyp.len() + 1 - n) as u64;
            let mut counts: FxMap<&[String], i64> = FxMap::default();
            for g in reference.windows(n) {
                *counts.entry(g).or_default() += 1;
            }
            for g in hyp.windows(n) {
                if let Some(c) = counts.get_mut(g) {
                    if *c > 0 {
                        *c -= 1;
                        s.matches[n - 1] += 1;
                    }
                }
            }
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_N {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU in `[0, 100]`.
    pub fn score(&self) -> f64 {
        let (c, r) = (self.hyp_len, self.ref_len);
        if c == 0 {
            return if r == 0 { 100.0 } else { 0.0 };
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_N {
            let total = self.totals[n];
            if total == 0 {
                continue;
            }
            let p = if self.matches[n] == 0 {
                1.0 / (2.0 * total as f64)
            } else {
                self.matches[n] as f64 / total as f64
            };
            log_sum += ln(p);
            orders += 1;
        }
        let bp = if c < r { exp(1.0 - r as f64 / c as f64) } else { 1.0 };
        let bleu = 100.0 * bp * exp(log_sum / orders as f64);
        bleu.clamp(0.0, 100.0)
    }
}

pub fn corpus_stats(hyps: &[Sentence], refs: &[Sentence]) -> Result<BleuStats> {
    if hyps.len() != refs.len() {
        return Err(Error::CorpusLengthMismatch { hyps: hyps.len(), refs: refs.len() });
    }
    if hyps.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        total.add(&BleuStats::sentence(h.tokens(), r.tokens()));
    }
    Ok(total)
}

/// Corpus BLEU-4 in `[0, 100]`.
pub fn bleu(hyps: &[Sentence], refs: &[Sentence]) -> Result<f64> {
    Ok(corpus_stats(hyps, refs)?.score())
}

/// Subword handling around decoding.
#[derive(Clone, Copy, Default)]
pub struct Postprocess<'a> {
    /// Sources are encoded with it before decoding and outputs decoded after.
    pub bpe: Option<&'a BpeModel>,
    pub policy: DetokPolicy,
}

impl Postprocess<'_> {
    pub fn prepare(&self, x: &Sentence) -> Sentence {
        match self.bpe {
            Some(m) => m.encode(x),
            None => x.clone(),
        }
    }

    /// Detokenizes and re-splits on whitespace.
    pub fn finish(&self, y: &Sentence) -> Sentence {
        match self.bpe {
            Some(m) => Sentence::parse(&m.decode(y, self.policy)),
            None => y.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub bleu: f64,
    pub sentences: usize,
    pub mode: &'static str,
    pub lambdas: Option<(f64, f64)>,
    pub hypotheses: Vec<Sentence>,
}

/// Decodes every test source and scores the outputs against the references.
pub fn evaluate_system(
    model: &dyn Translator,
    test: &[Pair],
    mode: &DecodeMode<'_>,
    post: Postprocess<'_>,
) -> Result<Report> {
    if test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sources: Vec<Sentence> = test.iter().map(|p| post.prepare(&p.source)).collect();
    let raw = translate_corpus(model, &sources, mode)?;
    let hypotheses: Vec<Sentence> = raw.iter().map(|y| post.finish(y)).collect();
    let refs: Vec<Sentence> = test.iter().map(|p| p.target.untagged()).collect();
    let lambdas = match mode {
        DecodeMode::Beam => None,
        DecodeMode::Rerank(r) => Some((r.weights.lambda1(), r.weights.lambda2())),
    };
    Ok(Report { bleu: bleu(&hypotheses, &refs)?, sentences: test.len(), mode: mode.name(), lambdas, hypotheses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(x: &str) -> Sentence {
        Sentence::parse(x)
    }

    #[test]
    fn perfect_match_is_100() {
        let c = vec![s("a b c d e"), s("x y"), s("q")];
        assert_eq!(bleu(&c, &c).unwrap(), 100.0);
    }

    #[test]
    fn clipped_unigram_precision() {
        let st = BleuStats::sentence(s("the the the the the the the").tokens(), s("the cat is on the mat").tokens());
        assert_eq!((st.matches[0], st.totals[0]), (2, 7));
    }

    #[test]
    fn brevity_penalty_half_length() {
        let hyp = vec![s("a b c d e f g h")];
        let r = vec![s("a b c d e f g h i j k l m n o p")];
        // precisions all 1, c = r/2
        let b = bleu(&hyp, &r).unwrap();
        assert!((b - 100.0 * exp(-1.0)).abs() < 1e-9);
        assert!((b - 36.79).abs() < 0.01);
    }

    #[test]
    fn errors_and_edge_cases() {
        assert_eq!(bleu(&[], &[]), Err(Error::EmptyCorpus));
        assert_eq!(bleu(&[s("a")], &[]), Err(Error::CorpusLengthMismatch { hyps: 1, refs: 0 }));
        assert_eq!(bleu(&[s("")], &[s("a")]).unwrap(), 0.0);
        // single-token corpus: only unigram precision is defined
        assert_eq!(bleu(&[s("a")], &[s("a")]).unwrap(), 100.0);
    }

    #[test]
    fn zero_match_smoothing() {
        let b = bleu(&[s("a b c d")], &[s("w x y z")]).unwrap();
        // p_n = 1/(2·total_n) with totals 4, 3, 2, 1
        let expect = 100.0 * exp((ln(1.0 / 8.0) + ln(1.0 / 6.0) + ln(1.0 / 4.0) + ln(1.0 / 2.0)) / 4.0);
        assert!((b - expect).abs() < 1e-9);
    }
}
