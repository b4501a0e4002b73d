//! Noisy-channel reranking of n-best lists.
//!
//! A candidate `y` for source `x` is scored as
//! `fwd + lambda1 · ln P(x | y) + lambda2 · ln P(y)`, where the channel term
//! comes from a reverse-direction model and the last term from a target LM.

use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::{Pair, Sentence};
use crate::error::{Error, Result};
use crate::lm::NGramLM;
use crate::metrics;
use crate::par;
use crate::seed;
use crate::tm::Translator;

/// Upper bound of both weights.
pub const MAX_LAMBDA: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct NBestEntry {
    pub hypothesis: Sentence,
    pub fwd: f64,
    pub channel: Option<f64>,
    pub lm: Option<f64>,
    pub combined: Option<f64>,
}

impl NBestEntry {
    pub fn new(hypothesis: Sentence, fwd: f64) -> Self {
        NBestEntry { hypothesis, fwd, channel: None, lm: None, combined: None }
    }
}

/// Candidates for one source sentence, best first under the active key.
#[derive(Clone, Debug, PartialEq)]
pub struct NBestList {
    pub source: Sentence,
    pub entries: Vec<NBestEntry>,
}

impl NBestList {
    pub fn new(source: Sentence, entries: Vec<NBestEntry>) -> Self {
        NBestList { source, entries }
    }

    pub fn top(&self) -> Option<&NBestEntry> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoisyChannelWeights {
    lambda1: f64,
    lambda2: f64,
}

impl NoisyChannelWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for l in [lambda1, lambda2] {
            if !(0.0..=MAX_LAMBDA).contains(&l) {
                return Err(Error::WeightOutOfRange(l));
            }
        }
        Ok(NoisyChannelWeights { lambda1, lambda2 })
    }

    /// Weight of the channel score.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Weight of the language model score.
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
}

pub fn combined_score(fwd: f64, channel: f64, lm: f64, w: NoisyChannelWeights) -> Result<f64> {
    if !(fwd.is_finite() && channel.is_finite() && lm.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    Ok(fwd + w.lambda1 * channel + w.lambda2 * lm)
}

/// Fills the channel and LM slots of every entry.
pub fn score_list(list: &mut NBestList, backward: &dyn Translator, lm: &NGramLM) {
    for e in &mut list.entries {
        e.channel = Some(backward.channel_score(&list.source, &e.hypothesis));
        e.lm = Some(lm.logprob(&e.hypothesis));
    }
}

/// Re-sorts a list whose slots are filled. Exact ties keep their current order.
pub fn resort(mut list: NBestList, w: NoisyChannelWeights) -> Result<NBestList> {
    for e in &mut list.entries {
        let (Some(ch), Some(lm)) = (e.channel, e.lm) else {
            return Err(Error::NonFiniteScore);
        };
        e.combined = Some(combined_score(e.fwd, ch, lm, w)?);
    }
    list.entries.sort_by(|a, b| b.combined.unwrap_or(0.0).total_cmp(&a.combined.unwrap_or(0.0)));
    Ok(list)
}

/// Scores every entry with `backward` and `lm`, then sorts by combined score.
pub fn rerank(
    mut list: NBestList,
    backward: &dyn Translator,
    lm: &NGramLM,
    w: NoisyChannelWeights,
) -> Result<NBestList> {
    score_list(&mut list, backward, lm);
    resort(list, w)
}

/// What the generation step needs to rerank.
#[derive(Clone, Copy)]
pub struct Reranker<'a> {
    pub backward: &'a dyn Translator,
    pub lm: &'a NGramLM,
    pub weights: NoisyChannelWeights,
    pub nbest: usize,
}

#[derive(Clone, Copy)]
pub enum DecodeMode<'a> {
    Beam,
    Rerank(Reranker<'a>),
}

impl DecodeMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            DecodeMode::Beam => "beam",
            DecodeMode::Rerank(_) => "rerank",
        }
    }
}

/// Top-1 output for one sentence.
pub fn translate_one(model: &dyn Translator, x: &Sentence, mode: &DecodeMode<'_>) -> Result<Sentence> {
    let list = match mode {
        DecodeMode::Beam => model.nbest(x, 1)?,
        DecodeMode::Rerank(r) => rerank(model.nbest(x, r.nbest)?, r.backward, r.lm, r.weights)?,
    };
    list.entries.into_iter().next().map(|e| e.hypothesis).ok_or(Error::NoAlignment(0))
}

/// Translates a corpus; output order follows input order.
pub fn translate_corpus(
    model: &dyn Translator,
    sources: &[Sentence],
    mode: &DecodeMode<'_>,
) -> Result<Vec<Sentence>> {
    par::map(sources, |x| translate_one(model, x, mode)).into_iter().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaTuning {
    pub weights: NoisyChannelWeights,
    pub bleu: f64,
    /// Every evaluated weight pair with its BLEU, trial 0 being `(0, 0)`.
    pub trials: Vec<(NoisyChannelWeights, f64)>,
}

/// Weight pair for trial `i`: `(0, 0)` first, then uniform draws from `[0, 3]²`.
pub fn lambda_trial(seed: u64, i: usize) -> NoisyChannelWeights {
    if i == 0 {
        return NoisyChannelWeights::default();
    }
    let mut rng = seed::rng(seed, "lambda", i as u64);
    NoisyChannelWeights { lambda1: rng.gen_range(0.0..=MAX_LAMBDA), lambda2: rng.gen_range(0.0..=MAX_LAMBDA) }
}

/// Random search for the weights maximizing dev BLEU of reranked top-1
/// outputs. N-best lists and their slot scores are computed once.
pub fn tune_lambdas(
    dev: &[Pair],
    forward: &dyn Translator,
    backward: &dyn Translator,
    lm: &NGramLM,
    nbest: usize,
    trials: usize,
    seed: u64,
) -> Result<LambdaTuning> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let lists: Vec<NBestList> = par::map(dev, |p| -> Result<NBestList> {
        let mut list = forward.nbest(&p.source, nbest)?;
        score_list(&mut list, backward, lm);
        Ok(list)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let refs: Vec<Sentence> = dev.iter().map(|p| p.target.untagged()).collect();
    let evaluated = par::map_range(trials, |i| -> Result<(NoisyChannelWeights, f64)> {
        let w = lambda_trial(seed, i);
        let hyps = lists
            .iter()
            .map(|l| pick(l, w).map(|e| e.hypothesis.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok((w, metrics::bleu(&hyps, &refs)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, t) in evaluated.iter().enumerate() {
        if t.1 > evaluated[best].1 {
            best = i;
        }
    }
    Ok(LambdaTuning { weights: evaluated[best].0, bleu: evaluated[best].1, trials: evaluated })
}

/// The entry with the highest combined score; earliest wins ties.
fn pick(list: &NBestList, w: NoisyChannelWeights) -> Result<&NBestEntry> {
    let mut best: Option<(&NBestEntry, f64)> = None;
    for e in &list.entries {
        let s = combined_score(e.fwd, e.channel.unwrap_or(f64::NAN), e.lm.unwrap_or(f64::NAN), w)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((e, s));
        }
    }
    best.map(|b| b.0).ok_or(Error::NoAlignment(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn entry(h: &str, fwd: f64, ch: f64, lm: f64) -> NBestEntry {
        NBestEntry { hypothesis: Sentence::parse(h), fwd, channel: Some(ch), lm: Some(lm), combined: None }
    }

    fn w(a: f64, b: f64) -> NoisyChannelWeights {
        NoisyChannelWeights::new(a, b).unwrap()
    }

    #[test]
    fn combined_score_arithmetic() {
        assert_eq!(combined_score(-2.0, -3.0, -5.0, w(1.0, 0.5)).unwrap(), -7.5);
        assert_eq!(combined_score(-1.25, -3.0, -5.0, w(0.0, 0.0)).unwrap(), -1.25);
        assert_eq!(combined_score(-1.0, -1.0, -1.0, w(3.0, 3.0)).unwrap(), -7.0);
        assert_eq!(combined_score(f64::NAN, 0.0, 0.0, w(0.0, 0.0)), Err(Error::NonFiniteScore));
        assert_eq!(combined_score(0.0, f64::NEG_INFINITY, 0.0, w(0.0, 0.0)), Err(Error::NonFiniteScore));
    }

    #[test]
    fn weights_are_bounded() {
        assert!(NoisyChannelWeights::new(3.0, 0.0).is_ok());
        assert_eq!(NoisyChannelWeights::new(3.5, 0.0), Err(Error::WeightOutOfRange(3.5)));
        assert_eq!(NoisyChannelWeights::new(0.0, -0.1), Err(Error::WeightOutOfRange(-0.1)));
    }

    #[test]
    fn channel_promotes_second_entry() {
        let list = NBestList::new(
            Sentence::parse("s"),
            vec![entry("a", -1.0, -6.0, -2.0), entry("b", -1.5, -2.0, -2.0)],
        );
        // lambda1 = 2: a -> -1 - 12 - 2 = -15, b -> -1.5 - 4 - 2 = -7.5
        let out = resort(list.clone(), w(2.0, 1.0)).unwrap();
        assert_eq!(out.entries[0].hypothesis, Sentence::parse("b"));
        assert_eq!(out.entries[0].combined, Some(-7.5));
        assert_eq!(out.entries[1].combined, Some(-15.0));
        let null = resort(list, w(0.0, 0.0)).unwrap();
        assert_eq!(null.entries[0].hypothesis, Sentence::parse("a"));
    }

    #[test]
    fn ties_keep_prior_order_and_resort_is_idempotent() {
        let list = NBestList::new(
            Sentence::parse("s"),
            vec![entry("a", -1.0, -1.0, -1.0), entry("b", -1.0, -1.0, -1.0), entry("c", 0.0, -9.0, 0.0)],
        );
        let once = resort(list, w(1.0, 1.0)).unwrap();
        let names: Vec<_> = once.entries.iter().map(|e| e.hypothesis.tokens()[0].clone()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(resort(once.clone(), w(1.0, 1.0)).unwrap(), once);
    }

    #[test]
    fn constant_shift_of_forward_scores_keeps_ranking() {
        let list = NBestList::new(
            Sentence::parse("s"),
            vec![entry("a", -1.0, -3.0, -2.0), entry("b", -2.0, -1.0, -2.5), entry("c", -1.5, -2.0, -1.0)],
        );
        let mut shifted = list.clone();
        for e in &mut shifted.entries {
            e.fwd += 7.0;
        }
        for (a, b) in [(0.0, 0.0), (1.0, 0.5), (3.0, 3.0), (0.2, 2.9)] {
            let r1: Vec<_> = resort(list.clone(), w(a, b)).unwrap().entries.into_iter().map(|e| e.hypothesis).collect();
            let r2: Vec<_> = resort(shifted.clone(), w(a, b)).unwrap().entries.into_iter().map(|e| e.hypothesis).collect();
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn lambda_trials_start_at_zero_and_are_deterministic() {
        assert_eq!(lambda_trial(9, 0), NoisyChannelWeights::default());
        for i in 1..50 {
            let a = lambda_trial(9, i);
            assert_eq!(a, lambda_trial(9, i));
            assert!((0.0..=3.0).contains(&a.lambda1()) && (0.0..=3.0).contains(&a.lambda2()));
        }
        assert_ne!(lambda_trial(9, 1), lambda_trial(10, 1));
    }
}
