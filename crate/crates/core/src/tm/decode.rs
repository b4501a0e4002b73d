//! Windowed beam search and forced Viterbi scoring.
//!
//! A hypothesis emits exactly one target symbol per source position. At step
//! `i` it may consume any unused source position `j` with `|j - i| <= window`.
//! Coverage is kept as a bit mask relative to the current step: bit `b` stands
//! for source position `i + b - window`.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::hash_map::Entry;

use crate::lm::{LmIndex, NGramLM};
use crate::vocab::FxMap;

pub(crate) const MAX_WINDOW: usize = 31;

/// Candidate target symbols for every source position, with their lexical
/// log-scores. Symbol ids must be ordered like the symbols' strings.
pub(crate) struct Lattice {
    pub(crate) options: Vec<Vec<(u32, f64)>>,
}

pub(crate) struct Scorer<'a> {
    pub(crate) lm: &'a NGramLM,
    pub(crate) index: &'a LmIndex,
    pub(crate) lm_weight: f64,
}

impl Scorer<'_> {
    #[inline]
    pub(crate) fn step(&self, history: &[u32], y: u32) -> f64 {
        if self.lm_weight == 0.0 {
            0.0
        } else {
            self.lm_weight * self.index.step(self.lm, history, Some(y))
        }
    }

    #[inline]
    pub(crate) fn end(&self, history: &[u32]) -> f64 {
        if self.lm_weight == 0.0 {
            0.0
        } else {
            self.lm_weight * self.index.step(self.lm, history, None)
        }
    }
}

pub(crate) struct Hypothesis {
    pub(crate) tokens: Vec<u32>,
    pub(crate) score: f64,
}

struct Node {
    tokens: Vec<u32>,
    prefix: u32,
    mask: u64,
    score: f64,
}

struct Cand {
    parent: u32,
    y: u32,
    prefix: u32,
    mask: u64,
    score: f64,
}

fn initial_mask(window: usize) -> u64 {
    (1u64 << window) - 1
}

/// Positions reachable from `mask` at step `i`, with the successor mask.
#[inline]
fn moves(mask: u64, i: usize, len: usize, window: usize) -> impl Iterator<Item = (usize, u64)> {
    (0..=2 * window).filter_map(move |b| {
        let pos = (i + b).checked_sub(window)?;
        if pos >= len || mask >> b & 1 == 1 {
            return None;
        }
        let next = mask | 1 << b;
        if next & 1 == 0 {
            return None;
        }
        Some((pos, next >> 1))
    })
}

/// Returns up to `n` complete hypotheses, best first. Ties in score are broken
/// by the token sequence (ascending ids).
pub(crate) fn beam_search(
    lattice: &Lattice,
    scorer: &Scorer<'_>,
    window: usize,
    width: usize,
    n: usize,
) -> Vec<Hypothesis> {
    let len = lattice.options.len();
    let mut beam = vec![Node { tokens: Vec::new(), prefix: 0, mask: initial_mask(window), score: 0.0 }];
    for i in 0..len {
        let mut prefixes: FxMap<(u32, u32), u32> = FxMap::default();
        let mut slots: FxMap<(u32, u64), usize> = FxMap::default();
        let mut cands: Vec<Cand> = Vec::new();
        for (pi, node) in beam.iter().enumerate() {
            let mut lm_cache: Vec<(u32, f64)> = Vec::new();
            for (pos, mask) in moves(node.mask, i, len, window) {
                for &(y, lex) in &lattice.options[pos] {
                    let lm = match lm_cache.iter().find(|c| c.0 == y) {
                        Some(c) => c.1,
                        None => {
                            let v = scorer.step(&node.tokens, y);
                            lm_cache.push((y, v));
                            v
                        }
                    };
                    let score = node.score + (lex + lm);
                    let fresh = prefixes.len() as u32;
                    let prefix = *prefixes.entry((node.prefix, y)).or_insert(fresh);
                    match slots.entry((prefix, mask)) {
                        Entry::Occupied(e) => {
                            let c = &mut cands[*e.get()];
                            if score > c.score {
                                c.score = score;
                                c.parent = pi as u32;
                            }
                        }
                        Entry::Vacant(e) => {
                            e.insert(cands.len());
                            cands.push(Cand { parent: pi as u32, y, prefix, mask, score });
                        }
                    }
                }
            }
        }
        let order = |a: &Cand, b: &Cand| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| {
                    beam[a.parent as usize].tokens.cmp(&beam[b.parent as usize].tokens)
                })
                .then_with(|| a.y.cmp(&b.y))
                .then_with(|| a.mask.cmp(&b.mask))
        };
        if cands.len() > width {
            cands.select_nth_unstable_by(width - 1, order);
            cands.truncate(width);
        }
        cands.sort_unstable_by(order);
        beam = cands
            .iter()
            .map(|c| {
                let parent = &beam[c.parent as usize];
                let mut tokens = Vec::with_capacity(len);
                tokens.extend_from_slice(&parent.tokens);
                tokens.push(c.y);
                Node { tokens, prefix: c.prefix, mask: c.mask, score: c.score }
            })
            .collect();
        if beam.is_empty() {
            return Vec::new();
        }
    }
    let mut done: Vec<Hypothesis> = beam
        .into_iter()
        .map(|node| {
            let score = node.score + scorer.end(&node.tokens);
            Hypothesis { tokens: node.tokens, score }
        })
        .collect();
    done.sort_unstable_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens)));
    done.truncate(n);
    done
}

/// Best score of a fixed target sequence over all admissible alignments.
/// `lex(pos, step)` gives the lexical score of emitting `target[step]` from
/// source position `pos`. Returns `None` when no alignment exists.
pub(crate) fn forced_score<F>(
    len: usize,
    target: &[u32],
    scorer: &Scorer<'_>,
    window: usize,
    mut lex: F,
) -> Option<f64>
where
    F: FnMut(usize, usize) -> f64,
{
    let mut states: FxMap<u64, f64> = FxMap::default();
    states.insert(initial_mask(window), 0.0);
    for i in 0..len {
        let lm = scorer.step(&target[..i], target[i]);
        let mut next: FxMap<u64, f64> = FxMap::default();
        for (&mask, &score) in &states {
            for (pos, m) in moves(mask, i, len, window) {
                let s = score + (lex(pos, i) + lm);
                next.entry(m).and_modify(|v| *v = v.max(s)).or_insert(s);
            }
        }
        states = next;
    }
    if states.is_empty() {
        return None;
    }
    let best = states.values().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(best + scorer.end(target))
}
