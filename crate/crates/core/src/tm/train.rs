use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{DecoderSettings, LexModel, FLOOR, NULL};
use crate::corpus::{DataMix, Direction, Pair};
use crate::error::{Error, Result};
use crate::lm::NGramLM;
use crate::math::ln;
use crate::vocab::Vocab;

struct Encoded {
    weight: f64,
    /// Source length including NULL.
    rows: usize,
    /// `slots[j * rows + i]` is the table slot of `(source_i, target_j)`.
    slots: Vec<u32>,
}

/// IBM Model 1 EM state.
///
/// Without a prior the M-step is the usual renormalization of expected
/// counts. With a prior of strength `tau` centred on a base table the update
/// is `t(y|x) = (c(x,y) + tau·t0(y|x)) / (c(x) + tau)`.
pub struct Ibm1 {
    src: Vocab,
    tgt: Vocab,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    t: Vec<f64>,
    prior: Option<(f64, Vec<f64>)>,
    pairs: Vec<Encoded>,
    iterations: usize,
}

impl Ibm1 {
    /// Prepares EM over weighted pairs with a uniform initial table.
    pub fn new<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Pair, u32)>,
    {
        Self::build(pairs, None)
    }

    /// Prepares MAP-EM starting from, and regularized towards, `base`.
    pub fn with_prior<'a, I>(pairs: I, base: &LexModel, tau: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Pair, u32)>,
    {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("prior strength {tau}")));
        }
        Self::build(pairs, Some((base, tau)))
    }

    fn build<'a, I>(pairs: I, base: Option<(&LexModel, f64)>) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Pair, u32)>,
    {
        let mut src = Vocab::new();
        let mut tgt = Vocab::new();
        src.intern(NULL);
        if let Some((b, _)) = base {
            for w in b.source_vocab() {
                src.intern(w);
            }
            for w in b.target_vocab() {
                tgt.intern(w);
            }
        }
        let mut raw: Vec<(f64, Vec<u32>, Vec<u32>)> = Vec::new();
        for (pair, weight) in pairs {
            let s = pair.source.split_tags().1;
            let t = pair.target.split_tags().1;
            if s.is_empty() || t.is_empty() || weight == 0 {
                continue;
            }
            let mut sids = vec![0u32];
            sids.extend(s.iter().map(|w| src.intern(w)));
            let tids = t.iter().map(|w| tgt.intern(w)).collect();
            raw.push((weight as f64, sids, tids));
        }
        if raw.is_empty() {
            return Err(Error::NoParallelData);
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); src.len()];
        for (_, sids, tids) in &raw {
            for &s in sids {
                rows[s as usize].extend_from_slice(tids);
            }
        }
        if let Some((b, _)) = base {
            for (s, t, _) in b.entries() {
                let (si, ti) = (src.get(s).unwrap_or(0), tgt.get(t).unwrap_or(0));
                rows[si as usize].push(ti);
            }
        }
        let mut row_ptr = Vec::with_capacity(src.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        drop(rows);
        let slot = |s: u32, t: u32| -> u32 {
            let lo = row_ptr[s as usize];
            let hi = row_ptr[s as usize + 1];
            (lo + cols[lo..hi].binary_search(&t).unwrap_or_else(|_| unreachable!())) as u32
        };
        let pairs = raw
            .iter()
            .map(|(weight, sids, tids)| {
                let mut slots = Vec::with_capacity(sids.len() * tids.len());
                for &t in tids {
                    for &s in sids {
                        slots.push(slot(s, t));
                    }
                }
                Encoded { weight: *weight, rows: sids.len(), slots }
            })
            .collect();
        let (t, prior) = match base {
            None => (vec![1.0 / tgt.len() as f64; cols.len()], None),
            Some((b, tau)) => {
                let mut p0 = vec![0.0; cols.len()];
                for s in 0..src.len() {
                    for k in row_ptr[s]..row_ptr[s + 1] {
                        p0[k] = b.prob(src.word(s as u32), tgt.word(cols[k]));
                    }
                }
                let t = p0.iter().map(|&p| if p > 0.0 { p } else { FLOOR }).collect();
                (t, Some((tau, p0)))
            }
        };
        Ok(Ibm1 { src, tgt, row_ptr, cols, t, prior, pairs, iterations: 0 })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Weighted training log-likelihood under the current table.
    pub fn log_likelihood(&self) -> f64 {
        let mut ll = 0.0;
        for p in &self.pairs {
            let mut sent = 0.0;
            for chunk in p.slots.chunks_exact(p.rows) {
                let denom: f64 = chunk.iter().map(|&k| self.t[k as usize]).sum();
                sent += ln(denom / p.rows as f64);
            }
            ll += p.weight * sent;
        }
        ll
    }

    /// One EM iteration. Returns the log-likelihood of the table it started from.
    pub fn step(&mut self) -> f64 {
        let mut counts = vec![0.0; self.t.len()];
        let mut ll = 0.0;
        for p in &self.pairs {
            let mut sent = 0.0;
            for chunk in p.slots.chunks_exact(p.rows) {
                let denom: f64 = chunk.iter().map(|&k| self.t[k as usize]).sum();
                if denom <= 0.0 {
                    continue;
                }
                sent += ln(denom / p.rows as f64);
                let scale = p.weight / denom;
                for &k in chunk {
                    counts[k as usize] += self.t[k as usize] * scale;
                }
            }
            ll += p.weight * sent;
        }
        for s in 0..self.src.len() {
            let (lo, hi) = (self.row_ptr[s], self.row_ptr[s + 1]);
            let total: f64 = counts[lo..hi].iter().sum();
            match &self.prior {
                None => {
                    if total > 0.0 {
                        for (t, c) in self.t[lo..hi].iter_mut().zip(&counts[lo..hi]) {
                            *t = c / total;
                        }
                    }
                }
                Some((tau, p0)) => {
                    let denom = total + tau * p0[lo..hi].iter().sum::<f64>();
                    if denom > 0.0 {
                        for k in lo..hi {
                            self.t[k] = (counts[k] + tau * p0[k]) / denom;
                        }
                    }
                }
            }
        }
        self.iterations += 1;
        ll
    }

    /// Current table as `(source, target, probability)` entries.
    pub fn entries(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::with_capacity(self.cols.len());
        for s in 0..self.src.len() {
            for k in self.row_ptr[s]..self.row_ptr[s + 1] {
                out.push((self.src.word(s as u32).into(), self.tgt.word(self.cols[k]).into(), self.t[k]));
            }
        }
        out
    }

    /// Snapshot of the current table as a decodable model.
    pub fn to_model(
        &self,
        direction: Direction,
        lm: Arc<NGramLM>,
        settings: DecoderSettings,
    ) -> Result<LexModel> {
        LexModel::from_entries(direction, self.entries(), lm, settings)
    }
}

/// Trains a model on `mix` for a fixed number of EM iterations.
pub fn em_train(
    mix: &DataMix,
    iterations: usize,
    lm: Arc<NGramLM>,
    settings: DecoderSettings,
) -> Result<LexModel> {
    if iterations == 0 {
        return Err(Error::InvalidIterations);
    }
    let mut em = Ibm1::new(mix.weighted_pairs())?;
    for _ in 0..iterations {
        em.step();
    }
    em.to_model(mix.direction(), lm, settings)
}
