use super::*;
use crate::corpus::{Pair, Tag, TaggedDataset};
use crate::corpus::DataMix;
use alloc::string::ToString;
use alloc::vec;
use proptest::prelude::*;
use std::collections::HashMap;

fn pair(s: &str, t: &str) -> Pair {
    Pair::new(Sentence::parse(s), Sentence::parse(t))
}

fn flat_lm(words: &[&str]) -> Arc<NGramLM> {
    let corpus: Vec<Sentence> = words.iter().map(|w| Sentence::parse(w)).collect();
    Arc::new(NGramLM::train(&corpus, 1, 1.0).unwrap())
}

/// Dense textbook IBM Model 1 EM with NULL, uniform start.
fn naive_em(pairs: &[(Vec<&str>, Vec<&str>)], iters: usize) -> HashMap<(String, String), f64> {
    let mut src: Vec<&str> = vec![NULL];
    let mut tgt: Vec<&str> = Vec::new();
    for (s, t) in pairs {
        src.extend(s.iter());
        tgt.extend(t.iter());
    }
    src.sort();
    src.dedup();
    tgt.sort();
    tgt.dedup();
    let mut t: HashMap<(&str, &str), f64> = HashMap::new();
    for &s in &src {
        for &y in &tgt {
            t.insert((s, y), 1.0 / tgt.len() as f64);
        }
    }
    for _ in 0..iters {
        let mut c: HashMap<(&str, &str), f64> = HashMap::new();
        for (s, ys) in pairs {
            let xs: Vec<&str> = core::iter::once(NULL).chain(s.iter().copied()).collect();
            for &y in ys {
                let z: f64 = xs.iter().map(|&x| t[&(x, y)]).sum();
                for &x in &xs {
                    *c.entry((x, y)).or_default() += t[&(x, y)] / z;
                }
            }
        }
        for &x in &src {
            let total: f64 = tgt.iter().map(|&y| c.get(&(x, y)).copied().unwrap_or(0.0)).sum();
            if total > 0.0 {
                for &y in &tgt {
                    t.insert((x, y), c.get(&(x, y)).copied().unwrap_or(0.0) / total);
                }
            }
        }
    }
    t.into_iter().map(|((a, b), p)| ((a.to_string(), b.to_string()), p)).collect()
}

#[test]
fn em_matches_naive_oracle_on_hand_corpus() {
    let data = [pair("a b", "x y"), pair("a", "x")];
    let mut em = Ibm1::new(data.iter().map(|p| (p, 1))).unwrap();
    for _ in 0..5 {
        em.step();
    }
    let oracle = naive_em(&[(vec!["a", "b"], vec!["x", "y"]), (vec!["a"], vec!["x"])], 5);
    let got = em.entries();
    assert_eq!(got.len(), 6);
    for (s, t, p) in got {
        assert!((p - oracle[&(s.clone(), t.clone())]).abs() < 1e-12, "{s} {t}");
    }
    assert!(oracle[&("a".into(), "x".into())] > oracle[&("a".into(), "y".into())]);
    assert!(oracle[&("b".into(), "y".into())] > 0.5);
}

#[test]
fn first_iteration_by_hand() {
    // Uniform start over {x, y}: every t = 1/2.
    // Pair 1: each y gets 1/3 from each of NULL, a, b. Pair 2: x gets 1/2 from NULL and a.
    // a: c(x)=1/3+1/2, c(y)=1/3 -> t(x|a)=5/7.
    let data = [pair("a b", "x y"), pair("a", "x")];
    let mut em = Ibm1::new(data.iter().map(|p| (p, 1))).unwrap();
    em.step();
    let m = em.to_model(Direction::Forward, flat_lm(&["x y"]), DecoderSettings::default()).unwrap();
    assert!((m.prob("a", "x") - 5.0 / 7.0).abs() < 1e-12);
    assert!((m.prob("b", "y") - 0.5).abs() < 1e-12);
    assert_eq!(m.prob("b", "z"), 0.0);
}

#[test]
fn weights_equal_replication() {
    let a = pair("a b", "x y");
    let b = pair("b c", "y z");
    let mut w = Ibm1::new([(&a, 3), (&b, 1)]).unwrap();
    let mut r = Ibm1::new([(&a, 1), (&a, 1), (&a, 1), (&b, 1)]).unwrap();
    for _ in 0..4 {
        assert!((w.step() - r.step()).abs() < 1e-9);
    }
    for (x, y) in w.entries().into_iter().zip(r.entries()) {
        assert_eq!((x.0, x.1), (y.0, y.1));
        assert!((x.2 - y.2).abs() < 1e-12);
    }
}

#[test]
fn tags_are_not_aligned() {
    let data = [pair("<bt> a", "x")];
    let em = Ibm1::new(data.iter().map(|p| (p, 1))).unwrap();
    assert!(em.entries().iter().all(|e| !e.0.starts_with("<b")));
}

fn small_pairs() -> impl Strategy<Value = Vec<(Vec<u8>, Vec<u8>)>> {
    let side = || proptest::collection::vec(0u8..5, 1..5);
    proptest::collection::vec((side(), side()), 1..=20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn em_likelihood_never_decreases(raw in small_pairs()) {
        let pairs: Vec<Pair> = raw
            .iter()
            .map(|(s, t)| {
                let s: Vec<String> = s.iter().map(|i| alloc::format!("s{i}")).collect();
                let t: Vec<String> = t.iter().map(|i| alloc::format!("t{i}")).collect();
                Pair::new(Sentence::new(s), Sentence::new(t))
            })
            .collect();
        let mut em = Ibm1::new(pairs.iter().map(|p| (p, 1))).unwrap();
        let mut prev = em.step();
        for _ in 0..8 {
            let ll = em.step();
            prop_assert!(ll >= prev - 1e-9, "{} < {}", ll, prev);
            prev = ll;
        }
        prop_assert!(em.log_likelihood() >= prev - 1e-9);
    }
}

#[test]
fn map_prior_keeps_distributions_and_strong_prior_pins_base() {
    let data = [pair("a b", "x y"), pair("a", "x")];
    let lm = flat_lm(&["x y"]);
    let base = LexModel::from_entries(
        Direction::Forward,
        vec![("a".into(), "y".into(), 1.0), ("b".into(), "x".into(), 1.0)],
        lm.clone(),
        DecoderSettings::default(),
    )
    .unwrap();
    let mut zero = Ibm1::with_prior(data.iter().map(|p| (p, 1)), &base, 0.0).unwrap();
    let mut plain = Ibm1::new(data.iter().map(|p| (p, 1))).unwrap();
    zero.step();
    plain.step();
    let z = zero.to_model(Direction::Forward, lm.clone(), DecoderSettings::default()).unwrap();
    let p = plain.to_model(Direction::Forward, lm.clone(), DecoderSettings::default()).unwrap();
    for m in [&z, &p] {
        for s in ["a", "b", NULL] {
            let sum: f64 = m.target_vocab().iter().map(|t| m.prob(s, t)).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
    let mut strong = Ibm1::with_prior(data.iter().map(|p| (p, 1)), &base, 1e12).unwrap();
    strong.step();
    let s = strong.to_model(Direction::Forward, lm, DecoderSettings::default()).unwrap();
    assert!((s.prob("a", "y") - 1.0).abs() < 1e-6);
    assert!((s.prob("b", "x") - 1.0).abs() < 1e-6);
}

fn one_hot() -> LexModel {
    let entries = vec![
        ("a".into(), "x".into(), 1.0),
        ("b".into(), "y".into(), 1.0),
        ("c".into(), "z".into(), 1.0),
        (NULL.into(), "x".into(), 1.0),
    ];
    let settings = DecoderSettings { lm_weight: 0.0, window: 0, ..Default::default() };
    LexModel::from_entries(Direction::Forward, entries, flat_lm(&["x y z"]), settings).unwrap()
}

#[test]
fn one_hot_table_decodes_word_for_word() {
    let m = one_hot();
    let out = m.translate_nbest(&Sentence::parse("a c b a"), 1).unwrap();
    assert_eq!(out.top().unwrap().hypothesis.tokens(), Sentence::parse("x z y x").tokens());
    assert_eq!(out.entries[0].fwd, 0.0);
    let tagged = m.translate_nbest(&Sentence::parse("<bt> b"), 1).unwrap();
    assert_eq!(tagged.top().unwrap().hypothesis.tokens(), ["y".to_string()]);
    assert_eq!(m.translate_nbest(&Sentence::parse("<bt>"), 1).unwrap_err(), Error::EmptySentence);
    assert_eq!(m.translate_nbest(&Sentence::parse("a"), 0).unwrap_err(), Error::InvalidNBest);
    // Unknown symbols use the NULL row.
    assert_eq!(m.translate_nbest(&Sentence::parse("q"), 1).unwrap().top().unwrap().hypothesis.tokens(), ["x".to_string()]);
}

#[test]
fn channel_score_hand_case() {
    let entries = vec![(NULL.into(), "x".into(), 0.2), ("a".into(), "x".into(), 0.6), ("a".into(), "y".into(), 0.4)];
    let m = LexModel::from_entries(Direction::Forward, entries, flat_lm(&["x y"]), DecoderSettings::default()).unwrap();
    let x = Sentence::parse("a");
    let y = Sentence::parse("x y");
    let want = ((0.2 + 0.6) / 2.0f64).ln() + ((0.0 + 0.4) / 2.0f64).ln();
    assert!((m.log_marginal(&x, &y) - want).abs() < 1e-12);
    assert!((m.channel_score(&y, &x) - want).abs() < 1e-12);
    let floor = m.log_marginal(&x, &Sentence::parse("zz"));
    assert!((floor - (FLOOR / 2.0).ln()).abs() < 1e-12);
}

#[test]
fn settings_are_validated() {
    let m = one_hot();
    assert_eq!(m.clone().with_settings(DecoderSettings { beam: 0, ..Default::default() }).unwrap_err(), Error::InvalidBeam);
    assert_eq!(
        m.with_settings(DecoderSettings { window: 32, ..Default::default() }).unwrap_err(),
        Error::InvalidWindow(32)
    );
}

/// Random model over `s0..s{ns}` and `t0..t{nt}` with a bigram LM.
fn random_model(seed: u64, ns: usize, nt: usize, window: usize, lm_weight: f64) -> LexModel {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for s in core::iter::once(NULL.to_string()).chain((0..ns).map(|i| alloc::format!("s{i}"))) {
        let k = rng.gen_range(1..=3.min(nt));
        let mut ts: Vec<usize> = (0..nt).collect();
        rand::seq::SliceRandom::shuffle(ts.as_mut_slice(), &mut rng);
        let ws: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let z: f64 = ws.iter().sum();
        for (t, w) in ts.into_iter().take(k).zip(ws) {
            entries.push((s.clone(), alloc::format!("t{t}"), w / z));
        }
    }
    let corpus: Vec<Sentence> = (0..20)
        .map(|_| {
            let len = rng.gen_range(1..6);
            Sentence::new((0..len).map(|_| alloc::format!("t{}", rng.gen_range(0..nt))).collect())
        })
        .collect();
    let lm = Arc::new(NGramLM::train(&corpus, 2, 0.1).unwrap());
    let settings = DecoderSettings { beam: 4, window, lm_weight, max_options: None, length_norm: false };
    LexModel::from_entries(Direction::Forward, entries, lm, settings).unwrap()
}

fn permutations(len: usize, window: usize) -> Vec<Vec<usize>> {
    fn go(len: usize, window: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let i = cur.len();
        if i == len {
            out.push(cur.clone());
            return;
        }
        for j in 0..len {
            if !used[j] && j.abs_diff(i) <= window {
                used[j] = true;
                cur.push(j);
                go(len, window, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(len, window, &mut Vec::new(), &mut vec![false; len], &mut out);
    out
}

/// Exhaustive best score per distinct output sequence.
fn brute_force(m: &LexModel, x: &[String]) -> Vec<(Vec<String>, f64)> {
    let mut best: HashMap<Vec<String>, f64> = HashMap::new();
    for perm in permutations(x.len(), m.settings().window) {
        let mut seqs: Vec<(Vec<String>, f64)> = vec![(Vec::new(), 0.0)];
        for &pos in &perm {
            let mut next = Vec::new();
            for (seq, lex) in &seqs {
                for (t, lp) in m.options(&x[pos]) {
                    let mut s = seq.clone();
                    s.push(t.to_string());
                    next.push((s, lex + lp));
                }
            }
            seqs = next;
        }
        for (seq, lex) in seqs {
            let lm = if m.settings().lm_weight == 0.0 {
                0.0
            } else {
                m.settings().lm_weight * m.lm().logprob(&Sentence::new(seq.clone()))
            };
            let score = lex + lm;
            let e = best.entry(seq).or_insert(f64::NEG_INFINITY);
            if score > *e {
                *e = score;
            }
        }
    }
    let mut v: Vec<_> = best.into_iter().collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn wide_beam_equals_exhaustive_search(seed in 0u64..10_000, len in 1usize..=4, window in 0usize..=1, lmw in prop::sample::select(vec![0.0, 0.5, 1.0])) {
        let m = random_model(seed, 4, 4, window, lmw);
        let wide = DecoderSettings { beam: 100_000, ..m.settings().clone() };
        let m = m.with_settings(wide).unwrap();
        let x: Vec<String> = (0..len).map(|i| alloc::format!("s{}", (seed as usize + i * 7) % 5)).collect();
        let oracle = brute_force(&m, &x);
        let got = m.translate_nbest(&Sentence::new(x.clone()), 5).unwrap();
        prop_assert_eq!(got.len(), oracle.len().min(5));
        for (e, (_, score)) in got.entries.iter().zip(&oracle) {
            prop_assert!((e.fwd - score).abs() < 1e-9, "{} vs {}", e.fwd, score);
        }
        prop_assert_eq!(got.top().unwrap().hypothesis.tokens(), oracle[0].0.as_slice());
        for e in &got.entries {
            let forced = m.pair_logprob(&Sentence::new(x.clone()), &e.hypothesis).unwrap();
            prop_assert!((forced - e.fwd).abs() < 1e-9);
        }
    }
}

#[test]
fn narrow_beam_top_scores_are_consistent() {
    for seed in 0..30 {
        let m = random_model(seed, 6, 5, 1, 0.8);
        let x = Sentence::parse("s0 s3 s5 s1 s2 s4");
        let out = m.translate_nbest(&x, 4).unwrap();
        for w in out.entries.windows(2) {
            assert!(w[0].fwd >= w[1].fwd);
        }
        for e in &out.entries {
            assert!(m.pair_logprob(&x, &e.hypothesis).unwrap() >= e.fwd - 1e-9);
        }
    }
}

#[test]
fn pair_logprob_rejects_length_mismatch() {
    let m = one_hot();
    assert!(matches!(
        m.pair_logprob(&Sentence::parse("a b"), &Sentence::parse("x")),
        Err(Error::LengthMismatch { .. })
    ));
}

#[test]
fn em_train_on_mix() {
    let ds = TaggedDataset::parallel("p", Tag::new("<d:in>").unwrap(), vec![pair("a b", "x y"), pair("a", "x")]).unwrap();
    let mix = DataMix::build(vec![ds]).unwrap();
    let m = em_train(&mix, 10, flat_lm(&["x y"]), DecoderSettings::default()).unwrap();
    assert!(m.prob("a", "x") > 0.9);
    assert!(m.prob("b", "y") > 0.5);
    assert_eq!(em_train(&mix, 0, flat_lm(&["x"]), DecoderSettings::default()).unwrap_err(), Error::InvalidIterations);
}
