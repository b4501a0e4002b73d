//! Byte-pair encoding.
//!
//! Merges are learned greedily over word frequencies: the most frequent
//! adjacent symbol pair is merged until the symbol inventory (characters
//! plus merged symbols) reaches the requested size or no pair occurs at least
//! twice. Equal counts are broken by the lexicographically smallest
//! `(left, right)` pair, so the merge list does not depend on corpus order.
//!
//! Encoded words carry the joiner on every piece except the first:
//! `aaab` with the single merge `(a, a)` becomes `aa @@a @@b`.
//!
//! Reserved tokens (domain tags and anything listed in [`BpeOptions::reserved`])
//! are never split or merged.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{is_tag, Sentence};
use crate::error::{Error, Result};
use crate::vocab::{FxMap, FxSet, Vocab};

pub const DEFAULT_JOINER: &str = "@@";

#[derive(Clone, Debug)]
pub struct BpeOptions {
    pub joiner: String,
    pub reserved: BTreeSet<String>,
}

impl Default for BpeOptions {
    fn default() -> Self {
        BpeOptions { joiner: DEFAULT_JOINER.to_string(), reserved: BTreeSet::new() }
    }
}

/// How decoded words are joined into a surface string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DetokPolicy {
    /// Words separated by single spaces.
    #[default]
    SpaceJoined,
    /// Everything concatenated, for scripts written without spaces.
    Unspaced,
}

#[derive(Clone, Debug)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    vocab_size: usize,
    joiner: String,
    reserved: BTreeSet<String>,
    ranks: FxMap<String, FxMap<String, usize>>,
}

impl PartialEq for BpeModel {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges
            && self.vocab_size == other.vocab_size
            && self.joiner == other.joiner
            && self.reserved == other.reserved
    }
}

impl BpeModel {
    /// Rebuilds a model from its serialized parts.
    pub fn from_parts(
        merges: Vec<(String, String)>,
        vocab_size: usize,
        joiner: String,
        reserved: BTreeSet<String>,
    ) -> Result<Self> {
        if joiner.is_empty() {
            return Err(Error::InvalidParameter("joiner must not be empty".into()));
        }
        let mut ranks: FxMap<String, FxMap<String, usize>> = FxMap::default();
        for (rank, (l, r)) in merges.iter().enumerate() {
            let slot = ranks.entry(l.clone()).or_default();
            if slot.insert(r.clone(), rank).is_some() {
                return Err(Error::InvalidParameter(alloc::format!("duplicate merge {l} {r}")));
            }
        }
        Ok(BpeModel { merges, vocab_size, joiner, reserved, ranks })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn joiner(&self) -> &str {
        &self.joiner
    }

    pub fn reserved(&self) -> &BTreeSet<String> {
        &self.reserved
    }

    pub fn is_reserved(&self, token: &str) -> bool {
        is_tag(token) || self.reserved.contains(token)
    }

    fn rank(&self, left: &str, right: &str) -> Option<usize> {
        self.ranks.get(left).and_then(|m| m.get(right)).copied()
    }

    /// Segments one word into raw pieces (no joiner).
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.rank(&w[0], &w[1]))
                .min();
            let Some(rank) = best else { break };
            let (l, r) = &self.merges[rank];
            symbols = merge_pair(&symbols, l, r);
        }
        symbols
    }

    /// Encodes a sentence; reserved tokens pass through untouched.
    pub fn encode(&self, sentence: &Sentence) -> Sentence {
        let mut out = Vec::with_capacity(sentence.len() * 2);
        for token in sentence.iter() {
            if self.is_reserved(token) {
                out.push(token.clone());
                continue;
            }
            for (i, piece) in self.segment_word(token).into_iter().enumerate() {
                if i == 0 {
                    out.push(piece);
                } else {
                    let mut s = String::with_capacity(self.joiner.len() + piece.len());
                    s.push_str(&self.joiner);
                    s.push_str(&piece);
                    out.push(s);
                }
            }
        }
        Sentence::new(out)
    }

    /// Inverts [`encode`](Self::encode): continuation pieces are glued to the
    /// previous piece and words are joined according to `policy`.
    pub fn decode(&self, sentence: &Sentence, policy: DetokPolicy) -> String {
        decode_pieces(sentence, &self.joiner, &self.reserved, policy)
    }
}

/// Decoding that needs only the joiner; used when no model is at hand.
pub fn decode_pieces(
    sentence: &Sentence,
    joiner: &str,
    reserved: &BTreeSet<String>,
    policy: DetokPolicy,
) -> String {
    let mut words: Vec<String> = Vec::new();
    for piece in sentence.iter() {
        let reserved = is_tag(piece) || reserved.contains(piece);
        match piece.strip_prefix(joiner) {
            Some(rest) if !reserved && !words.is_empty() => {
                words.last_mut().expect("non-empty").push_str(rest)
            }
            Some(rest) if !reserved => words.push(rest.to_string()),
            _ => words.push(piece.clone()),
        }
    }
    match policy {
        DetokPolicy::SpaceJoined => words.join(" "),
        DetokPolicy::Unspaced => words.concat(),
    }
}

fn merge_pair(symbols: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            let mut s = String::with_capacity(left.len() + right.len());
            s.push_str(left);
            s.push_str(right);
            out.push(s);
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Learns a merge list from sentences of both languages.
pub fn learn_bpe(corpus: &[Sentence], vocab_size: usize, options: &BpeOptions) -> Result<BpeModel> {
    if corpus.iter().all(Sentence::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    if options.joiner.is_empty() {
        return Err(Error::InvalidParameter("joiner must not be empty".into()));
    }
    let mut reserved = options.reserved.clone();
    let mut freq: FxMap<&str, u64> = FxMap::default();
    for token in corpus.iter().flat_map(|s| s.iter()) {
        if is_tag(token) {
            reserved.insert(token.clone());
        } else if !reserved.contains(token) {
            *freq.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut words: Vec<(&str, u64)> = freq.into_iter().collect();
    words.sort_unstable();

    let mut symbols = Vocab::new();
    let mut inventory: FxSet<String> = FxSet::default();
    let mut segs: Vec<(Vec<u32>, u64)> = Vec::with_capacity(words.len());
    for (w, f) in &words {
        let ids = w
            .chars()
            .map(|c| {
                let s = c.to_string();
                inventory.insert(s.clone());
                symbols.intern(&s)
            })
            .collect();
        segs.push((ids, *f));
    }
    if vocab_size < inventory.len() {
        return Err(Error::VocabTooSmall { requested: vocab_size, chars: inventory.len() });
    }

    let mut counts: FxMap<(u32, u32), i64> = FxMap::default();
    let mut occurs: FxMap<(u32, u32), FxSet<usize>> = FxMap::default();
    for (wi, (ids, f)) in segs.iter().enumerate() {
        for p in ids.windows(2) {
            *counts.entry((p[0], p[1])).or_default() += *f as i64;
            occurs.entry((p[0], p[1])).or_default().insert(wi);
        }
    }

    let mut merges = Vec::new();
    while inventory.len() < vocab_size {
        let mut best: Option<((u32, u32), i64)> = None;
        for (&pair, &count) in counts.iter() {
            if count < 2 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bp, bc)) => {
                    count > bc
                        || (count == bc
                            && (symbols.word(pair.0), symbols.word(pair.1))
                                < (symbols.word(bp.0), symbols.word(bp.1)))
                }
            };
            if better && !inventory.contains(&concat(&symbols, pair)) {
                best = Some((pair, count));
            }
        }
        let Some((pair, _)) = best else { break };
        let merged = concat(&symbols, pair);
        let merged_id = symbols.intern(&merged);
        inventory.insert(merged);
        merges.push((symbols.word(pair.0).to_string(), symbols.word(pair.1).to_string()));

        let mut touched: Vec<usize> = occurs.remove(&pair).into_iter().flatten().collect();
        touched.sort_unstable();
        for wi in touched {
            let (ids, f) = &mut segs[wi];
            let f = *f as i64;
            for p in ids.windows(2) {
                *counts.get_mut(&(p[0], p[1])).expect("tracked pair") -= f;
            }
            let mut next = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && (ids[i], ids[i + 1]) == pair {
                    next.push(merged_id);
                    i += 2;
                } else {
                    next.push(ids[i]);
                    i += 1;
                }
            }
            for p in next.windows(2) {
                *counts.entry((p[0], p[1])).or_default() += f;
                occurs.entry((p[0], p[1])).or_default().insert(wi);
            }
            *ids = next;
        }
        counts.retain(|_, c| *c > 0);
    }

    BpeModel::from_parts(merges, vocab_size, options.joiner.clone(), reserved)
}

fn concat(symbols: &Vocab, pair: (u32, u32)) -> String {
    let mut s = String::from(symbols.word(pair.0));
    s.push_str(symbols.word(pair.1));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn sents(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| Sentence::parse(l)).collect()
    }

    fn pairs(m: &BpeModel) -> Vec<(&str, &str)> {
        m.merges().iter().map(|(l, r)| (l.as_str(), r.as_str())).collect()
    }

    #[test]
    fn first_merge_on_aaab() {
        // (a,a) occurs twice, (a,b) once
        let m = learn_bpe(&sents(&["aaab"]), 100, &BpeOptions::default()).unwrap();
        assert_eq!(pairs(&m), [("a", "a")]);
        let enc = m.encode(&Sentence::parse("aaab"));
        assert_eq!(enc.tokens(), ["aa", "@@a", "@@b"]);
    }

    #[test]
    fn single_character_corpus_learns_nothing() {
        let m = learn_bpe(&sents(&["a a a"]), 5, &BpeOptions::default()).unwrap();
        assert!(m.merges().is_empty());
    }

    #[test]
    fn hand_traces() {
        // ab:2 abc:1 -> (a,b)=3 (b,c)=1; then (ab,c)=1 stops
        let m = learn_bpe(&sents(&["ab ab abc"]), 100, &BpeOptions::default()).unwrap();
        assert_eq!(pairs(&m), [("a", "b")]);

        // equal counts: lexicographically smaller pair wins, budget stops after one
        let m = learn_bpe(&sents(&["cd ab cd ab"]), 5, &BpeOptions::default()).unwrap();
        assert_eq!(pairs(&m), [("a", "b")]);
        let m = learn_bpe(&sents(&["cd ab cd ab"]), 6, &BpeOptions::default()).unwrap();
        assert_eq!(pairs(&m), [("a", "b"), ("c", "d")]);

        // low:5 lower:2 newest:6 widest:3 (the classic example, letters only)
        let mut corpus = Vec::new();
        for (w, n) in [("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)] {
            for _ in 0..n {
                corpus.push(Sentence::parse(w));
            }
        }
        let m = learn_bpe(&corpus, 14, &BpeOptions::default()).unwrap();
        // e s: newest 6 + widest 3 = 9, s t: 9 -> (e,s) wins the tie;
        // then (es,t)=9, then (l,o)=7, (lo,w)=7
        assert_eq!(pairs(&m), [("e", "s"), ("es", "t"), ("l", "o"), ("lo", "w")]);
    }

    #[test]
    fn vocab_smaller_than_alphabet_is_an_error() {
        let err = learn_bpe(&sents(&["abc"]), 2, &BpeOptions::default()).unwrap_err();
        assert_eq!(err, Error::VocabTooSmall { requested: 2, chars: 3 });
    }

    #[test]
    fn tags_are_reserved() {
        let m = learn_bpe(&sents(&["<d:alt> aa aa"]), 50, &BpeOptions::default()).unwrap();
        assert!(m.reserved().contains("<d:alt>"));
        let enc = m.encode(&Sentence::parse("<d:alt> aaa"));
        assert_eq!(enc.tokens()[0], "<d:alt>");
        assert_eq!(m.decode(&enc, DetokPolicy::SpaceJoined), "<d:alt> aaa");
    }

    #[test]
    fn decode_policies() {
        let m = BpeModel::from_parts(vec![], 10, "@@".into(), BTreeSet::new()).unwrap();
        assert_eq!(m.decode(&Sentence::parse("aa @@a"), DetokPolicy::SpaceJoined), "aaa");
        assert_eq!(m.decode(&Sentence::parse("ab cd"), DetokPolicy::Unspaced), "abcd");
        assert_eq!(m.decode(&Sentence::parse("ab cd"), DetokPolicy::SpaceJoined), "ab cd");
    }

    #[test]
    fn unknown_characters_become_singletons() {
        let m = learn_bpe(&sents(&["aa aa"]), 10, &BpeOptions::default()).unwrap();
        assert_eq!(m.encode(&Sentence::parse("zaa")).tokens(), ["z", "@@aa"]);
    }

    #[test]
    fn inventory_grows_by_one_per_merge() {
        let corpus = sents(&["the cat sat on the mat", "that hat is the best hat", "cats that sat"]);
        let m = learn_bpe(&corpus, 60, &BpeOptions::default()).unwrap();
        let mut inv: BTreeSet<String> =
            corpus.iter().flat_map(|s| s.iter()).flat_map(|w| w.chars().map(|c| c.to_string())).collect();
        for (l, r) in m.merges() {
            let before = inv.len();
            inv.insert(alloc::format!("{l}{r}"));
            assert_eq!(inv.len(), before + 1);
        }
        assert!(inv.len() <= 60);
        // applying all merges uses no symbol outside the inventory
        for s in &corpus {
            for w in s.iter() {
                for piece in m.segment_word(w) {
                    assert!(inv.contains(&piece));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(words in proptest::collection::vec("[a-e]{1,7}", 1..12), vocab in 6usize..40) {
            let corpus = vec![Sentence::new(words.clone()), Sentence::parse("abc abd cde eed")];
            let m = learn_bpe(&corpus, vocab.max(5), &BpeOptions::default()).unwrap();
            let s = Sentence::new(words);
            prop_assert_eq!(m.decode(&m.encode(&s), DetokPolicy::SpaceJoined), s.to_string());
        }

        #[test]
        fn merges_ignore_sentence_order(mut lines in proptest::collection::vec("[a-d]{1,5}( [a-d]{1,5}){0,4}", 1..8)) {
            let a = learn_bpe(&sents(&lines.iter().map(String::as_str).collect::<Vec<_>>()), 30, &BpeOptions::default()).unwrap();
            lines.reverse();
            let b = learn_bpe(&sents(&lines.iter().map(String::as_str).collect::<Vec<_>>()), 30, &BpeOptions::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
