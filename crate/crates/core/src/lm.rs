//! Interpolated add-k n-gram language models.
//!
//! For order `m` and context `h` (the previous `m - 1` tokens, padded with
//! `<s>`):
//!
//! ```text
//! P_1(w)   = (c(w) + k) / (N + k·V)
//! P_m(w|h) = (c(h w) + k·V·P_{m-1}(w|h')) / (c(h) + k·V)
//! ```
//!
//! where `V` counts every predictable event: vocabulary words, `</s>` and
//! `<unk>`. Each level is a proper distribution over those events, so every
//! conditional sums to one and no probability is zero.
//!
//! Fine-tuning adds a component trained on in-domain text and mixes the
//! component probabilities linearly.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::math::{exp, ln};
use crate::vocab::{FxMap, Vocab};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const MAX_ORDER: usize = 6;

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;
const BITS: u32 = 21;
/// Largest vocabulary a component can hold (ids are packed into 21 bits).
pub const MAX_VOCAB: usize = (1 << BITS) - 2;

#[inline]
fn push_key(key: u128, id: u32) -> u128 {
    (key << BITS) | (id as u128 + 1)
}

fn key_of(ids: &[u32]) -> u128 {
    ids.iter().fold(0, |k, &id| push_key(k, id))
}

/// Counts of one training corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramCounts {
    vocab: Vocab,
    /// `ngrams[m - 1]` holds counts of m-grams.
    ngrams: Vec<FxMap<u128, u64>>,
    /// `contexts[m - 1]` holds counts of the (m-1)-gram contexts of m-grams.
    contexts: Vec<FxMap<u128, u64>>,
    total: u64,
    k: f64,
}

impl NGramCounts {
    fn empty(order: usize, k: f64) -> Self {
        NGramCounts {
            k,
            vocab: Vocab::from_words([BOS.into(), EOS.into(), UNK.into()]),
            ngrams: vec![FxMap::default(); order],
            contexts: vec![FxMap::default(); order],
            total: 0,
        }
    }

    fn order(&self) -> usize {
        self.ngrams.len()
    }

    /// Number of predictable events: words, `</s>` and `<unk>`.
    fn events(&self) -> usize {
        self.vocab.len() - 1
    }

    fn id(&self, token: &str) -> u32 {
        self.vocab.get(token).filter(|&id| id != BOS_ID).unwrap_or(UNK_ID)
    }

    fn add_event(&mut self, history: &[u32], w: u32, weight: u64) {
        let order = self.order();
        for m in 1..=order {
            let h = &history[history.len() - (m - 1)..];
            let hk = key_of(h);
            *self.ngrams[m - 1].entry(push_key(hk, w)).or_default() += weight;
            if m >= 2 {
                *self.contexts[m - 1].entry(hk).or_default() += weight;
            }
        }
        self.total += weight;
    }

    fn add_sentence(&mut self, tokens: &[String], weight: u64) {
        let order = self.order();
        let mut ids = vec![BOS_ID; order - 1];
        for t in tokens {
            let id = if t == BOS { UNK_ID } else { self.vocab.intern(t) };
            ids.push(id);
        }
        ids.push(EOS_ID);
        for i in order - 1..ids.len() {
            let (history, rest) = ids.split_at(i);
            self.add_event(&history[i + 1 - order..], rest[0], weight);
        }
    }

    /// `context` holds at least `order - 1` ids, most recent last.
    fn prob(&self, context: &[u32], w: u32) -> f64 {
        let k = self.k;
        let kv = k * self.events() as f64;
        let c1 = self.ngrams[0].get(&push_key(0, w)).copied().unwrap_or(0);
        let mut p = (c1 as f64 + k) / (self.total as f64 + kv);
        let mut hk = 0u128;
        for m in 2..=self.order() {
            hk = push_key_front(hk, context[context.len() - (m - 1)], m - 2);
            let ch = match self.contexts[m - 1].get(&hk) {
                Some(&c) if c > 0 => c,
                _ => continue,
            };
            let chw = self.ngrams[m - 1].get(&push_key(hk, w)).copied().unwrap_or(0);
            p = (chw as f64 + kv * p) / (ch as f64 + kv);
        }
        p
    }
}

/// Prepends `id` to a key that already holds `len` ids.
#[inline]
fn push_key_front(key: u128, id: u32, len: usize) -> u128 {
    ((id as u128 + 1) << (BITS as usize * len)) | key
}

/// Serializable view of one component.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentDump {
    pub weight: f64,
    pub order: usize,
    pub k: f64,
    /// Symbol table; ids index into it. The first three entries are `<s>`,
    /// `</s>` and `<unk>`.
    pub words: Vec<String>,
    /// Every stored n-gram with its count, sorted by length then ids.
    pub ngrams: Vec<(Vec<u32>, u64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NGramLM {
    order: usize,
    k: f64,
    components: Vec<(f64, NGramCounts)>,
}

impl NGramLM {
    pub fn train(corpus: &[Sentence], order: usize, k: f64) -> Result<Self> {
        Self::train_weighted(corpus.iter().map(|s| (s, 1)), order, k)
    }

    /// Trains on sentences with integer replication weights.
    pub fn train_weighted<'a, I>(corpus: I, order: usize, k: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Sentence, u32)>,
    {
        check_params(order, k)?;
        let mut counts = NGramCounts::empty(order, k);
        let mut any = false;
        for (s, w) in corpus {
            any = true;
            counts.add_sentence(s.tokens(), w as u64);
        }
        if !any {
            return Err(Error::EmptyCorpus);
        }
        if counts.vocab.len() > MAX_VOCAB {
            return Err(Error::InvalidParameter("vocabulary exceeds 2^21 - 2 symbols".into()));
        }
        Ok(NGramLM { order, k, components: vec![(1.0, counts)] })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    /// Weight of the most recently added in-domain component (0 for a base model).
    pub fn interp_alpha(&self) -> f64 {
        if self.components.len() < 2 {
            0.0
        } else {
            self.components.last().map(|c| c.0).unwrap_or(0.0)
        }
    }

    pub fn component_weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.0).collect()
    }

    /// Union of the component vocabularies, without the `<s>`/`</s>`/`<unk>` markers.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut words: Vec<String> = self
            .components
            .iter()
            .flat_map(|(_, c)| c.vocab.words()[3..].iter().cloned())
            .collect();
        words.sort_unstable();
        words.dedup();
        words
    }

    /// Mixes in a model trained on `in_domain`:
    /// `P = (1 - alpha)·P_self + alpha·P_in`.
    pub fn finetune(&self, in_domain: &[Sentence], alpha: f64) -> Result<Self> {
        self.finetune_weighted(in_domain.iter().map(|s| (s, 1)), alpha)
    }

    /// [`NGramLM::finetune`] with replication weights on the in-domain text.
    pub fn finetune_weighted<'a, I>(&self, in_domain: I, alpha: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Sentence, u32)>,
    {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let fresh = NGramLM::train_weighted(in_domain, self.order, self.k)?;
        let mut components: Vec<(f64, NGramCounts)> =
            self.components.iter().map(|(w, c)| ((1.0 - alpha) * w, c.clone())).collect();
        components.extend(fresh.components.into_iter().map(|(_, c)| (alpha, c)));
        Ok(NGramLM { order: self.order, k: self.k, components })
    }

    fn mix<F: FnMut(&NGramCounts) -> f64>(&self, mut f: F) -> f64 {
        let mut p = 0.0;
        for (w, c) in &self.components {
            if *w != 0.0 {
                p += w * f(c);
            }
        }
        p
    }

    /// `P(w | history)`. `history` is every preceding token of the sentence
    /// (without `<s>`); `None` asks for the end-of-sentence probability.
    pub fn cond_prob(&self, history: &[String], next: Option<&str>) -> f64 {
        let n = self.order - 1;
        self.mix(|c| {
            let mut ctx = [BOS_ID; MAX_ORDER];
            let tail = &history[history.len().saturating_sub(n)..];
            let off = n - tail.len();
            for (i, t) in tail.iter().enumerate() {
                ctx[off + i] = c.id(t);
            }
            let w = next.map_or(EOS_ID, |t| c.id(t));
            c.prob(&ctx[..n], w)
        })
    }

    /// Sum of natural-log conditional probabilities, including `</s>`.
    pub fn logprob(&self, sentence: &Sentence) -> f64 {
        let tokens = sentence.tokens();
        let mut total = 0.0;
        for i in 0..tokens.len() {
            total += ln(self.cond_prob(&tokens[..i], Some(&tokens[i])));
        }
        total + ln(self.cond_prob(tokens, None))
    }

    /// `exp(-Σ logprob / Σ (len + 1))`.
    pub fn perplexity(&self, corpus: &[Sentence]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let lp: f64 = corpus.iter().map(|s| self.logprob(s)).sum();
        let n: usize = corpus.iter().map(|s| s.len() + 1).sum();
        Ok(exp(-lp / n as f64))
    }

    /// Maps an external symbol table onto component ids for fast scoring.
    pub fn index(&self, symbols: &[String]) -> LmIndex {
        LmIndex {
            maps: self
                .components
                .iter()
                .map(|(_, c)| symbols.iter().map(|s| c.id(s)).collect())
                .collect(),
        }
    }

    pub fn dump(&self) -> Vec<ComponentDump> {
        self.components
            .iter()
            .map(|(weight, c)| {
                let mut ngrams = Vec::new();
                for (m, table) in c.ngrams.iter().enumerate() {
                    let mut rows: Vec<(Vec<u32>, u64)> =
                        table.iter().map(|(&key, &n)| (unpack(key, m + 1), n)).collect();
                    rows.sort_unstable();
                    ngrams.extend(rows);
                }
                ComponentDump { weight: *weight, order: c.order(), k: c.k, words: c.vocab.words().to_vec(), ngrams }
            })
            .collect()
    }

    pub fn from_dump(dumps: Vec<ComponentDump>) -> Result<Self> {
        if dumps.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut components = Vec::with_capacity(dumps.len());
        for d in dumps {
            check_params(d.order, d.k)?;
            let order = d.order;
            if d.words.len() < 3 || d.words[0] != BOS || d.words[1] != EOS || d.words[2] != UNK {
                return Err(Error::InvalidParameter("component vocabulary must start with <s> </s> <unk>".into()));
            }
            let mut counts = NGramCounts::empty(order, d.k);
            counts.vocab = Vocab::from_words(d.words);
            for (ids, n) in d.ngrams {
                let m = ids.len();
                if m == 0 || m > order || ids.iter().any(|&i| i as usize >= counts.vocab.len()) {
                    return Err(Error::InvalidParameter("n-gram record out of range".into()));
                }
                counts.ngrams[m - 1].insert(key_of(&ids), n);
                if m >= 2 {
                    *counts.contexts[m - 1].entry(key_of(&ids[..m - 1])).or_default() += n;
                } else {
                    counts.total += n;
                }
            }
            components.push((d.weight, counts));
        }
        let order = components.iter().map(|c: &(f64, NGramCounts)| c.1.order()).max().unwrap_or(1);
        let k = components[0].1.k;
        Ok(NGramLM { order, k, components })
    }

    /// Equal-weight mixture of several models.
    pub fn average(models: &[&NGramLM]) -> Result<Self> {
        let first = models.first().ok_or(Error::EmptyCorpus)?;
        if models.len() == 1 {
            return Ok((*first).clone());
        }
        let share = 1.0 / models.len() as f64;
        let components = models
            .iter()
            .flat_map(|m| m.components.iter().map(move |(w, c)| (w * share, c.clone())))
            .collect();
        let order = models.iter().map(|m| m.order).max().unwrap_or(1);
        Ok(NGramLM { order, k: first.k, components })
    }
}

fn unpack(mut key: u128, len: usize) -> Vec<u32> {
    let mask = (1u128 << BITS) - 1;
    let mut ids = vec![0u32; len];
    for slot in ids.iter_mut().rev() {
        *slot = ((key & mask) - 1) as u32;
        key >>= BITS;
    }
    ids
}

fn check_params(order: usize, k: f64) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidOrder { got: order, max: MAX_ORDER });
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidSmoothing(k));
    }
    Ok(())
}

/// Precomputed symbol mapping for scoring sequences of external ids.
///
/// External id `u32::MAX` stands for a symbol outside the table and scores
/// as `<unk>`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmIndex {
    maps: Vec<Vec<u32>>,
}

pub const UNKNOWN_SYMBOL: u32 = u32::MAX;

impl LmIndex {
    /// `ln P(next | history)` with external ids; `None` is end of sentence.
    /// Bitwise equal to `ln(lm.cond_prob(..))` on the same symbols.
    pub fn step(&self, lm: &NGramLM, history: &[u32], next: Option<u32>) -> f64 {
        let n = lm.order - 1;
        let tail = &history[history.len().saturating_sub(n)..];
        let off = n - tail.len();
        let mut i = 0;
        let p = lm.mix(|c| {
            let map = &self.maps[i];
            i += 1;
            let look = |e: u32| if e == UNKNOWN_SYMBOL { UNK_ID } else { map[e as usize] };
            let mut ctx = [BOS_ID; MAX_ORDER];
            for (j, &e) in tail.iter().enumerate() {
                ctx[off + j] = look(e);
            }
            c.prob(&ctx[..n], next.map_or(EOS_ID, look))
        });
        ln(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn corpus(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| Sentence::parse(l)).collect()
    }

    fn strs(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn unigram_add_k_formula() {
        let k = 0.5;
        let lm = NGramLM::train(&corpus(&["a a a b"]), 1, k).unwrap();
        // events: a a a b </s>; V = {a, b, </s>, <unk>}
        let expected = (3.0 + k) / (5.0 + 4.0 * k);
        assert!((lm.cond_prob(&[], Some("a")) - expected).abs() < 1e-15);
        let unk = k / (5.0 + 4.0 * k);
        assert!((lm.cond_prob(&[], Some("zzz")) - unk).abs() < 1e-15);
    }

    #[test]
    fn unambiguous_bigram_tends_to_certainty() {
        let lm = NGramLM::train(&corpus(&["a b"; 10]), 2, 1e-9).unwrap();
        assert!((lm.cond_prob(&strs(&["a"]), Some("b")) - 1.0).abs() < 1e-6);
        assert!((lm.cond_prob(&strs(&["a", "b"]), None) - 1.0).abs() < 1e-6);
        assert!(lm.logprob(&Sentence::parse("a b")).abs() < 1e-6);
    }

    #[test]
    fn large_k_is_uniform() {
        // three words + </s> + <unk> = 5 events
        let lm = NGramLM::train(&corpus(&["a b c"]), 2, 1e12).unwrap();
        for w in ["a", "b", "c", "zz"] {
            assert!((lm.cond_prob(&strs(&["a"]), Some(w)) - 0.2).abs() < 1e-9);
        }
        let ppl = lm.perplexity(&corpus(&["c b a a"])).unwrap();
        assert!((ppl - 5.0).abs() < 1e-6);
    }

    #[test]
    fn hand_computed_bigram_sentence() {
        let k = 1.0;
        let lm = NGramLM::train(&corpus(&["a b", "a a"]), 2, k).unwrap();
        // events: a b </s> a a </s> -> N = 6; V = {a, b, </s>, <unk>} = 4
        let kv = 4.0 * k;
        let p1 = |c: f64| (c + k) / (6.0 + kv);
        // contexts: <s>:2, a:3, b:1
        let p_a_bos = (2.0 + kv * p1(3.0)) / (2.0 + kv);
        let p_b_a = (1.0 + kv * p1(1.0)) / (3.0 + kv);
        let p_eos_b = (1.0 + kv * p1(2.0)) / (1.0 + kv);
        let expected = ln(p_a_bos) + ln(p_b_a) + ln(p_eos_b);
        assert!((lm.logprob(&Sentence::parse("a b")) - expected).abs() < 1e-12);
    }

    #[test]
    fn perplexity_of_single_sentence() {
        let lm = NGramLM::train(&corpus(&["a b c", "c b a"]), 3, 0.1).unwrap();
        let s = Sentence::parse("a b b");
        let ppl = lm.perplexity(core::slice::from_ref(&s)).unwrap();
        assert!((ppl - exp(-lm.logprob(&s) / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(NGramLM::train(&corpus(&["a"]), 0, 1.0), Err(Error::InvalidOrder { .. })));
        assert!(matches!(NGramLM::train(&corpus(&["a"]), 2, 0.0), Err(Error::InvalidSmoothing(_))));
        assert_eq!(NGramLM::train(&[], 2, 1.0).unwrap_err(), Error::EmptyCorpus);
        let lm = NGramLM::train(&corpus(&["a"]), 2, 1.0).unwrap();
        assert_eq!(lm.finetune(&corpus(&["b"]), 1.5).unwrap_err(), Error::InvalidAlpha(1.5));
    }

    #[test]
    fn interpolation_endpoints_are_exact() {
        let base = NGramLM::train(&corpus(&["a b c", "b c d", "a a"]), 3, 0.3).unwrap();
        let inn = corpus(&["x y", "y x a"]);
        let fresh = NGramLM::train(&inn, 3, 0.3).unwrap();
        let zero = base.finetune(&inn, 0.0).unwrap();
        let one = base.finetune(&inn, 1.0).unwrap();
        for s in ["a b", "x y a", "q", "c d a b"] {
            let s = Sentence::parse(s);
            assert_eq!(zero.logprob(&s).to_bits(), base.logprob(&s).to_bits());
            assert_eq!(one.logprob(&s).to_bits(), fresh.logprob(&s).to_bits());
        }
    }

    #[test]
    fn half_interpolation_averages_disjoint_unigrams() {
        let base = NGramLM::train(&corpus(&["a a b"]), 1, 0.5).unwrap();
        let inn = corpus(&["c d d"]);
        let fresh = NGramLM::train(&inn, 1, 0.5).unwrap();
        let mid = base.finetune(&inn, 0.5).unwrap();
        for w in ["a", "c", "d", "zz"] {
            let expect = 0.5 * base.cond_prob(&[], Some(w)) + 0.5 * fresh.cond_prob(&[], Some(w));
            assert!((mid.cond_prob(&[], Some(w)) - expect).abs() < 1e-15);
        }
        assert_eq!(mid.interp_alpha(), 0.5);
    }

    #[test]
    fn normalization_over_random_contexts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let words = ["a", "b", "c", "d", "e"];
        let lines: Vec<String> = (0..40)
            .map(|_| {
                let n = rng.gen_range(1..7);
                (0..n).map(|_| words[rng.gen_range(0..5)]).collect::<Vec<_>>().join(" ")
            })
            .collect();
        let c: Vec<Sentence> = lines.iter().map(|l| Sentence::parse(l)).collect();
        let base = NGramLM::train(&c, 3, 0.2).unwrap();
        let mut inn = c[..10].to_vec();
        inn.push(Sentence::parse("a b c d e"));
        let same_vocab = base.finetune(&inn, 0.3).unwrap();
        for lm in [&base, &same_vocab] {
            for _ in 0..1000 {
                let hlen = rng.gen_range(0..4);
                let hist: Vec<String> = (0..hlen)
                    .map(|_| {
                        if rng.gen_bool(0.1) { "oov".to_string() } else { words[rng.gen_range(0..5)].to_string() }
                    })
                    .collect();
                let mut total = lm.cond_prob(&hist, None) + lm.cond_prob(&hist, Some("<unk-any>"));
                for w in words {
                    total += lm.cond_prob(&hist, Some(w));
                }
                assert!((total - 1.0).abs() <= 1e-9, "sum {total}");
            }
        }
    }

    #[test]
    fn index_scoring_matches_string_scoring() {
        let lm = NGramLM::train(&corpus(&["a b c", "b c d", "a a"]), 3, 0.3)
            .unwrap()
            .finetune(&corpus(&["d d a"]), 0.4)
            .unwrap();
        let symbols = strs(&["d", "c", "b", "a", "new"]);
        let idx = lm.index(&symbols);
        let seq = [3u32, 2, 4, 1, UNKNOWN_SYMBOL, 0];
        let names = ["d", "c", "b", "a", "new"];
        for i in 0..seq.len() {
            let hist: Vec<String> = seq[..i]
                .iter()
                .map(|&e| if e == UNKNOWN_SYMBOL { "??".to_string() } else { names[e as usize].to_string() })
                .collect();
            let next = if seq[i] == UNKNOWN_SYMBOL { "??" } else { names[seq[i] as usize] };
            let a = idx.step(&lm, &seq[..i], Some(seq[i]));
            let b = ln(lm.cond_prob(&hist, Some(next)));
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dump_round_trip_is_bit_exact() {
        let lm = NGramLM::train(&corpus(&["a b c", "b c d", "a a"]), 3, 0.3)
            .unwrap()
            .finetune(&corpus(&["d d a"]), 0.4)
            .unwrap();
        let back = NGramLM::from_dump(lm.dump()).unwrap();
        assert_eq!(back, lm);
    }

    #[test]
    fn weighted_training_equals_replication() {
        let c = corpus(&["a b", "b c"]);
        let w = NGramLM::train_weighted([(&c[0], 3), (&c[1], 1)], 2, 0.1).unwrap();
        let r = NGramLM::train(&[c[0].clone(), c[0].clone(), c[0].clone(), c[1].clone()], 2, 0.1)
            .unwrap();
        assert_eq!(w, r);
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<Sentence>> {
        proptest::collection::vec("[a-d]( [a-d]){0,5}", 1..12)
            .prop_map(|lines| lines.iter().map(|l| Sentence::parse(l)).collect())
    }

    proptest! {
        #[test]
        fn logprob_is_finite_and_decreasing(c in arb_corpus(), probe in "[a-f]( [a-f]){0,6}") {
            let lm = NGramLM::train(&c, 3, 0.05).unwrap();
            let toks = Sentence::parse(&probe).into_tokens();
            let mut prev = 0.0;
            for i in 0..=toks.len() {
                // prefix score without </s>
                let lp: f64 = (0..i).map(|j| ln(lm.cond_prob(&toks[..j], Some(&toks[j])))).sum();
                prop_assert!(lp.is_finite());
                prop_assert!(lp <= prev + 1e-12);
                prev = lp;
            }
            let full = lm.logprob(&Sentence::new(toks));
            prop_assert!(full.is_finite() && full < 0.0);
        }

        #[test]
        fn training_fits_better_than_disjoint_text(c in arb_corpus()) {
            let lm = NGramLM::train(&c, 2, 0.01).unwrap();
            let other: Vec<Sentence> = c.iter().map(|s| {
                Sentence::new(s.iter().map(|t| alloc::format!("{t}x")).collect())
            }).collect();
            prop_assert!(lm.perplexity(&c).unwrap() <= lm.perplexity(&other).unwrap());
        }
    }
}
