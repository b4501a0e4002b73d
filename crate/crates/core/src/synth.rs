//! Synthetic language pairs with a known translation function and a
//! controllable domain shift.
//!
//! Source symbols are `s000`, `s001`, ... and target symbols `t000`, ...; the
//! lexicon is a random bijection between them. Translation maps every symbol
//! through the lexicon and then transposes adjacent pairs whose two source
//! symbols both belong to the swap class, scanning left to right without
//! overlap. Because both trigger conditions are symmetric, applying the same
//! rule with the mapped swap class undoes it.
//!
//! Sentences are drawn from a mixture of a Zipf unigram and a successor chain.
//! The chain is shared; in-domain and out-of-domain text differ in the rank
//! order of the unigram.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tags, Pair, Sentence, Side, Tag, TaggedDataset};
use crate::error::{Error, Result};
use crate::seed;
use crate::vocab::FxMap;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSizes {
    pub parallel: usize,
    pub mono_src: usize,
    pub mono_tgt: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for SynthSizes {
    fn default() -> Self {
        SynthSizes { parallel: 2000, mono_src: 50_000, mono_tgt: 50_000, dev: 500, test: 500 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub vocab_size: usize,
    /// Fraction of source symbols in the swap class.
    pub swap_fraction: f64,
    pub zipf_exponent: f64,
    /// Fraction of unigram ranks reshuffled for out-of-domain text.
    pub domain_shift: f64,
    /// Probability that the next token follows the successor chain.
    pub chain_prob: f64,
    /// Substitution rate on parallel training targets.
    pub noise_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
    pub sizes: SynthSizes,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 200,
            swap_fraction: 0.25,
            zipf_exponent: 1.0,
            domain_shift: 0.3,
            chain_prob: 0.9,
            noise_rate: 0.4,
            min_len: 5,
            max_len: 12,
            seed: 1,
            sizes: SynthSizes::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.vocab_size < 2 || self.vocab_size > 100_000 {
            return bad("vocab_size must be between 2 and 100000");
        }
        for (name, v) in [("swap_fraction", self.swap_fraction), ("domain_shift", self.domain_shift), ("chain_prob", self.chain_prob), ("noise_rate", self.noise_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad("zipf_exponent must be finite and non-negative");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len");
        }
        let s = &self.sizes;
        if [s.parallel, s.mono_src, s.mono_tgt, s.dev, s.test].contains(&0) {
            return bad("every corpus size must be at least 1");
        }
        Ok(())
    }
}

fn width(n: usize) -> usize {
    let mut w = 3;
    while 10usize.pow(w as u32) < n {
        w += 1;
    }
    w
}

pub fn source_symbol(i: usize, vocab: usize) -> String {
    format!("s{:0w$}", i, w = width(vocab))
}

pub fn target_symbol(i: usize, vocab: usize) -> String {
    format!("t{:0w$}", i, w = width(vocab))
}

struct Domain {
    weights: Vec<f64>,
    unigram: WeightedIndex<f64>,
    /// Rank position to symbol index.
    ranked: Vec<usize>,
}

impl Domain {
    fn new(spec: &SynthSpec, ranked: Vec<usize>) -> Result<Self> {
        let n = spec.vocab_size;
        let weights: Vec<f64> = (0..n).map(|r| libm::pow(r as f64 + 1.0, -spec.zipf_exponent)).collect();
        let unigram = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(format!("{e}")))?;
        Ok(Domain { weights, unigram, ranked })
    }

    fn sample(&self, rng: &mut ChaCha8Rng, spec: &SynthSpec, successor: &[usize]) -> Vec<usize> {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut out = Vec::with_capacity(len);
        let mut prev = self.ranked[self.unigram.sample(rng)];
        out.push(prev);
        while out.len() < len {
            prev = if rng.gen_bool(spec.chain_prob) {
                successor[prev]
            } else {
                self.ranked[self.unigram.sample(rng)]
            };
            out.push(prev);
        }
        out
    }

    /// Unigram distribution of the Zipf component, indexed by symbol.
    fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mut p = alloc::vec![0.0; self.weights.len()];
        for (r, &sym) in self.ranked.iter().enumerate() {
            p[sym] = self.weights[r] / total;
        }
        p
    }
}

/// Reshuffles a random `fraction` of the rank positions among themselves.
fn shifted(ranks: &[usize], fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = ranks.len();
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(rng);
    positions.truncate(libm::round(fraction * n as f64) as usize);
    let mut moved: Vec<usize> = positions.iter().map(|&p| ranks[p]).collect();
    moved.shuffle(rng);
    let mut out = ranks.to_vec();
    for (p, s) in positions.into_iter().zip(moved) {
        out[p] = s;
    }
    out
}

/// A fully instantiated synthetic language pair.
pub struct SynthLanguage {
    spec: SynthSpec,
    src_names: Vec<String>,
    tgt_names: Vec<String>,
    src_index: FxMap<String, usize>,
    tgt_index: FxMap<String, usize>,
    /// Source index to target index.
    lexicon: Vec<usize>,
    /// Target index to source index.
    inverse: Vec<usize>,
    swap: Vec<bool>,
    successor: Vec<usize>,
    in_domain: Domain,
    out_domain: Domain,
}

impl SynthLanguage {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.vocab_size;
        let mut rng = seed::rng(spec.seed, "lexicon", 0);
        let mut lexicon: Vec<usize> = (0..n).collect();
        lexicon.shuffle(&mut rng);
        let mut inverse = alloc::vec![0; n];
        for (s, &t) in lexicon.iter().enumerate() {
            inverse[t] = s;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(spec.seed, "swap", 0));
        let k = libm::round(spec.swap_fraction * n as f64) as usize;
        let mut swap = alloc::vec![false; n];
        for &s in &order[..k] {
            swap[s] = true;
        }
        let mut successor: Vec<usize> = (0..n).collect();
        successor.shuffle(&mut seed::rng(spec.seed, "successor", 0));
        let mut in_ranks: Vec<usize> = (0..n).collect();
        in_ranks.shuffle(&mut seed::rng(spec.seed, "domain-in", 0));
        let out_ranks = shifted(&in_ranks, spec.domain_shift, &mut seed::rng(spec.seed, "domain-out", 0));
        let src_names: Vec<String> = (0..n).map(|i| source_symbol(i, n)).collect();
        let tgt_names: Vec<String> = (0..n).map(|i| target_symbol(i, n)).collect();
        let src_index = src_names.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let tgt_index = tgt_names.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(SynthLanguage {
            spec: spec.clone(),
            src_names,
            tgt_names,
            src_index,
            tgt_index,
            lexicon,
            inverse,
            swap,
            successor,
            in_domain: Domain::new(spec, in_ranks)?,
            out_domain: Domain::new(spec, out_ranks)?,
        })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn lexicon(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.lexicon.iter().enumerate().map(|(s, &t)| (self.src_names[s].as_str(), self.tgt_names[t].as_str()))
    }

    pub fn swap_class(&self) -> BTreeSet<&str> {
        (0..self.swap.len()).filter(|&s| self.swap[s]).map(|s| self.src_names[s].as_str()).collect()
    }

    fn ids(&self, x: &Sentence, index: &FxMap<String, usize>) -> Result<Vec<usize>> {
        x.iter().map(|w| index.get(w).copied().ok_or_else(|| Error::UnknownSymbol(w.clone()))).collect()
    }

    /// Maps through `map`, then transposes left-to-right, non-overlapping
    /// adjacent pairs whose members both satisfy `swap`.
    fn apply(ids: &[usize], map: &[usize], swap: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut out: Vec<usize> = ids.iter().map(|&i| map[i]).collect();
        let mut i = 0;
        while i + 1 < ids.len() {
            if swap(ids[i]) && swap(ids[i + 1]) {
                out.swap(i, i + 1);
                i += 2;
            } else {
                i += 1;
            }
        }
        out
    }

    fn translate_ids(&self, ids: &[usize]) -> Vec<usize> {
        Self::apply(ids, &self.lexicon, |s| self.swap[s])
    }

    /// The reference translation of a source sentence.
    pub fn ground_truth(&self, x: &Sentence) -> Result<Sentence> {
        let ids = self.ids(x, &self.src_index)?;
        Ok(self.target_sentence(&self.translate_ids(&ids)))
    }

    /// The source sentence whose translation is `y`.
    pub fn invert(&self, y: &Sentence) -> Result<Sentence> {
        let ids = self.ids(y, &self.tgt_index)?;
        let out = Self::apply(&ids, &self.inverse, |t| self.swap[self.inverse[t]]);
        Ok(Sentence::new(out.into_iter().map(|s| self.src_names[s].clone()).collect()))
    }

    fn source_sentence(&self, ids: &[usize]) -> Sentence {
        Sentence::new(ids.iter().map(|&i| self.src_names[i].clone()).collect())
    }

    fn target_sentence(&self, ids: &[usize]) -> Sentence {
        Sentence::new(ids.iter().map(|&i| self.tgt_names[i].clone()).collect())
    }

    /// Expected in-domain and out-of-domain unigram distributions of the
    /// Zipf component, indexed by source symbol.
    pub fn domain_unigrams(&self) -> (Vec<f64>, Vec<f64>) {
        (self.in_domain.probabilities(), self.out_domain.probabilities())
    }

    fn draw(&self, domain: &Domain, label: &str, n: usize) -> Vec<Vec<usize>> {
        let mut rng = seed::rng(self.spec.seed, label, 0);
        (0..n).map(|_| domain.sample(&mut rng, &self.spec, &self.successor)).collect()
    }

    fn noisy(&self, ids: Vec<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
        ids.into_iter()
            .map(|t| {
                if rng.gen_bool(self.spec.noise_rate) {
                    rng.gen_range(0..self.spec.vocab_size)
                } else {
                    t
                }
            })
            .collect()
    }

    /// Generates every corpus of the benchmark.
    pub fn generate(&self) -> Result<SynthBundle> {
        let sizes = &self.spec.sizes;
        let mut noise_rng = seed::rng(self.spec.seed, "noise", 0);
        let parallel: Vec<Pair> = self
            .draw(&self.in_domain, "parallel", sizes.parallel)
            .into_iter()
            .map(|x| {
                let y = self.noisy(self.translate_ids(&x), &mut noise_rng);
                Pair::new(self.source_sentence(&x), self.target_sentence(&y))
            })
            .collect();
        let clean = |label: &str, n: usize| -> Vec<Pair> {
            self.draw(&self.in_domain, label, n)
                .into_iter()
                .map(|x| Pair::new(self.source_sentence(&x), self.target_sentence(&self.translate_ids(&x))))
                .collect()
        };
        let dev = clean("dev", sizes.dev);
        let test = clean("test", sizes.test);
        let mono_src: Vec<Sentence> =
            self.draw(&self.in_domain, "mono-src", sizes.mono_src).iter().map(|x| self.source_sentence(x)).collect();
        let origin = self.draw(&self.out_domain, "mono-tgt", sizes.mono_tgt);
        let mono_tgt: Vec<Sentence> = origin.iter().map(|x| self.target_sentence(&self.translate_ids(x))).collect();
        let mono_tgt_origin = origin.iter().map(|x| self.source_sentence(x)).collect();
        let tag = |t: &str| Tag::new(t);
        Ok(SynthBundle {
            parallel: TaggedDataset::parallel("parallel", tag(tags::IN_DOMAIN)?, parallel)?.with_upsample(3)?,
            mono_src: TaggedDataset::mono("mono-src", Side::MonoSource, tag(tags::IN_DOMAIN)?, mono_src)?,
            mono_tgt: TaggedDataset::mono("mono-tgt", Side::MonoTarget, tag(tags::OUT_DOMAIN)?, mono_tgt)?,
            mono_tgt_origin,
            dev,
            test,
        })
    }
}

/// Corpora of one synthetic benchmark instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthBundle {
    /// In-domain parallel training data, upsampled 3 times by default.
    pub parallel: TaggedDataset,
    /// In-domain source-side monolingual text.
    pub mono_src: TaggedDataset,
    /// Out-of-domain target-side monolingual text.
    pub mono_tgt: TaggedDataset,
    /// The source sentences `mono_tgt` was translated from.
    pub mono_tgt_origin: Vec<Sentence>,
    pub dev: Vec<Pair>,
    pub test: Vec<Pair>,
}

/// Builds the language and generates the bundle in one step.
pub fn gen_corpora(spec: &SynthSpec) -> Result<SynthBundle> {
    SynthLanguage::new(spec)?.generate()
}

/// Total-variation distance between the empirical unigram distributions of
/// two corpora.
pub fn unigram_tv(a: &[Sentence], b: &[Sentence]) -> f64 {
    fn dist(c: &[Sentence]) -> (FxMap<&str, f64>, f64) {
        let mut m: FxMap<&str, f64> = FxMap::default();
        let mut n = 0.0;
        for s in c {
            for w in s.iter() {
                *m.entry(w.as_str()).or_default() += 1.0;
                n += 1.0;
            }
        }
        (m, n)
    }
    let (pa, na) = dist(a);
    let (pb, nb) = dist(b);
    let mut keys: BTreeSet<&str> = pa.keys().copied().collect();
    keys.extend(pb.keys().copied());
    let mut tv = 0.0;
    for k in keys {
        let x = pa.get(k).copied().unwrap_or(0.0) / na.max(1.0);
        let y = pb.get(k).copied().unwrap_or(0.0) / nb.max(1.0);
        tv += (x - y).abs();
    }
    tv / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> SynthSpec {
        SynthSpec {
            vocab_size: 30,
            swap_fraction: 0.4,
            domain_shift: 1.0,
            sizes: SynthSizes { parallel: 50, mono_src: 60, mono_tgt: 400, dev: 10, test: 10 },
            ..Default::default()
        }
    }

    #[test]
    fn lexicon_is_a_bijection() {
        let lang = SynthLanguage::new(&small()).unwrap();
        let targets: BTreeSet<&str> = lang.lexicon().map(|p| p.1).collect();
        assert_eq!(targets.len(), 30);
        assert_eq!(lang.swap_class().len(), 12);
    }

    #[test]
    fn swap_rule_by_hand() {
        let lang = SynthLanguage::new(&small()).unwrap();
        let lex: FxMap<&str, &str> = lang.lexicon().collect();
        let swap = lang.swap_class();
        let mut s = swap.iter();
        let (a, b) = (*s.next().unwrap(), *s.next().unwrap());
        let n = lang.lexicon().map(|p| p.0).find(|w| !swap.contains(w)).unwrap();
        let gt = |x: &[&str]| lang.ground_truth(&Sentence::new(x.iter().map(|w| (*w).into()).collect())).unwrap();
        let t = |w: &str| String::from(lex[w]);
        assert_eq!(gt(&[a, b]).tokens(), [t(b), t(a)]);
        assert_eq!(gt(&[a, n]).tokens(), [t(a), t(n)]);
        assert_eq!(gt(&[n, a, b]).tokens(), [t(n), t(b), t(a)]);
        // Left to right without overlap: the third symbol stays.
        assert_eq!(gt(&[a, b, a]).tokens(), [t(b), t(a), t(a)]);
        assert!(lang.ground_truth(&Sentence::parse("zzz")).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trips(ids in proptest::collection::vec(0usize..30, 1..20)) {
            let lang = SynthLanguage::new(&small()).unwrap();
            let x = Sentence::new(ids.iter().map(|&i| source_symbol(i, 30)).collect());
            let y = lang.ground_truth(&x).unwrap();
            prop_assert_eq!(lang.invert(&y).unwrap(), x);
        }
    }

    #[test]
    fn generation_is_deterministic_and_shifted() {
        let spec = small();
        let a = gen_corpora(&spec).unwrap();
        let b = gen_corpora(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.parallel.len(), 50);
        assert_eq!(a.mono_tgt.len(), 400);
        assert_eq!(a.test.len(), 10);
        let lang = SynthLanguage::new(&spec).unwrap();
        for p in &a.dev {
            assert_eq!(lang.ground_truth(&p.source).unwrap(), p.target);
        }
        let in_src: Vec<Sentence> = a.mono_src.sentences().to_vec();
        assert!(unigram_tv(&in_src, &a.mono_tgt_origin) > 0.2);
        let (p, q) = lang.domain_unigrams();
        let tv: f64 = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
        assert!(tv > 0.2);
        let other = gen_corpora(&SynthSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a.dev, other.dev);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SynthSpec { vocab_size: 1, ..small() }.validate().is_err());
        assert!(SynthSpec { noise_rate: 1.5, ..small() }.validate().is_err());
        assert!(SynthSpec { min_len: 4, max_len: 3, ..small() }.validate().is_err());
    }

    #[test]
    fn tv_examples() {
        let a = [Sentence::parse("a a")];
        let b = [Sentence::parse("b b")];
        assert_eq!(unigram_tv(&a, &b), 1.0);
        assert_eq!(unigram_tv(&a, &a), 0.0);
    }
}
