//! Probability-averaging ensembles of lexical models.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::corpus::{Direction, Sentence};
use crate::error::{Error, Result};
use crate::lm::{LmIndex, NGramLM};
use crate::math::{ln, log_mean_exp};
use crate::rerank::{NBestEntry, NBestList};
use crate::tm::decode::{self, Lattice, Scorer};
use crate::tm::{marginal, LexModel, Translator, NULL};
use crate::vocab::{FxMap, Vocab};

/// Which language model an ensemble decodes with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnsembleLm {
    /// The first member's LM.
    #[default]
    First,
    /// Equal-weight mixture of all members' LMs.
    Average,
}

/// `ln(mean(exp(logprobs)))`.
pub fn average_logprobs(logprobs: &[f64]) -> f64 {
    log_mean_exp(logprobs)
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    members: Vec<LexModel>,
    lm_mode: EnsembleLm,
    /// Union of member target vocabularies, sorted.
    tgt: Vocab,
    lm: Arc<NGramLM>,
    lm_index: LmIndex,
    bias_ids: FxMap<String, FxMap<u32, f64>>,
}

impl Ensemble {
    pub fn new(members: Vec<LexModel>) -> Result<Self> {
        Self::with_lm(members, EnsembleLm::First)
    }

    pub fn with_lm(members: Vec<LexModel>, lm_mode: EnsembleLm) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        if members.iter().any(|m| m.direction() != first.direction()) {
            return Err(Error::MixedDirections);
        }
        let mut tgt_words: Vec<&str> =
            members.iter().flat_map(|m| m.target_vocab().iter().map(String::as_str)).collect();
        tgt_words.sort_unstable();
        tgt_words.dedup();
        let tgt = Vocab::from_words(tgt_words.into_iter().map(str::to_owned));
        let lm = match lm_mode {
            EnsembleLm::First => first.lm_handle().clone(),
            EnsembleLm::Average => {
                let lms: Vec<&NGramLM> = members.iter().map(|m| m.lm()).collect();
                Arc::new(NGramLM::average(&lms)?)
            }
        };
        let lm_index = lm.index(tgt.words());
        let bias_ids = first
            .tag_bias()
            .iter()
            .map(|(tag, row)| {
                let ids = row.iter().filter_map(|(w, b)| Some((tgt.get(w)?, *b))).collect();
                (tag.clone(), ids)
            })
            .collect();
        Ok(Ensemble { members, lm_mode, tgt, lm, lm_index, bias_ids })
    }

    pub fn members(&self) -> &[LexModel] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn lm_mode(&self) -> EnsembleLm {
        self.lm_mode
    }

    fn lead(&self) -> &LexModel {
        &self.members[0]
    }

    /// Averaged `t(target | source)`.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        let sum: f64 = self.members.iter().map(|m| m.prob(source, target)).sum();
        sum / self.members.len() as f64
    }

    /// `ln((1/k) Σ_i t_i(target | source))`.
    pub fn step_logprob(&self, source: &str, target: &str) -> f64 {
        ln(self.prob(source, target))
    }

    fn lattice(&self, content: &[String], tag: Option<&str>) -> Lattice {
        let bias = tag.and_then(|t| self.bias_ids.get(t)).filter(|b| !b.is_empty());
        let k = self.members.len() as f64;
        let options = content
            .iter()
            .map(|w| {
                let mut ids: Vec<u32> = self
                    .members
                    .iter()
                    .flat_map(|m| m.options(w).into_iter().filter_map(|(t, _)| self.tgt.get(t)))
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                ids.into_iter()
                    .map(|y| {
                        let word = self.tgt.word(y);
                        let mut sum = 0.0;
                        for m in &self.members {
                            sum += m.prob(w, word);
                        }
                        let lp = ln(sum / k);
                        (y, bias.and_then(|b| b.get(&y)).map_or(lp, |v| lp + v))
                    })
                    .collect()
            })
            .collect();
        Lattice { options }
    }

    pub fn translate_nbest(&self, x: &Sentence, n: usize) -> Result<NBestList> {
        if n == 0 {
            return Err(Error::InvalidNBest);
        }
        let (tag, content) = x.split_tags();
        if content.is_empty() {
            return Err(Error::EmptySentence);
        }
        let settings = self.lead().settings();
        let lattice = self.lattice(content, tag);
        let scorer = Scorer { lm: &self.lm, index: &self.lm_index, lm_weight: settings.lm_weight };
        let width = settings.beam.max(n);
        let hyps = decode::beam_search(&lattice, &scorer, settings.window, width, n);
        if hyps.is_empty() {
            return Err(Error::NoAlignment(settings.window));
        }
        let norm = (content.len() + 1) as f64;
        let entries = hyps
            .into_iter()
            .map(|h| {
                let words = h.tokens.iter().map(|&t| self.tgt.word(t).to_owned()).collect();
                let score = if settings.length_norm { h.score / norm } else { h.score };
                NBestEntry::new(Sentence::new(words), score)
            })
            .collect();
        Ok(NBestList::new(x.clone(), entries))
    }

    /// IBM Model 1 marginal with averaged tables.
    pub fn log_marginal(&self, source: &Sentence, target: &Sentence) -> f64 {
        let src: Vec<&str> = core::iter::once(NULL)
            .chain(source.split_tags().1.iter().map(String::as_str))
            .collect();
        marginal(target.split_tags().1, src.len(), |i, y| self.prob(src[i], y))
    }
}

impl Translator for Ensemble {
    fn direction(&self) -> Direction {
        self.lead().direction()
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
