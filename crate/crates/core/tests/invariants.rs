use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use lomt_core::corpus::{DataMix, Direction, Pair, Sentence, Tag, TaggedDataset};
use lomt_core::ensemble::Ensemble;
use lomt_core::lm::NGramLM;
use lomt_core::metrics::{bleu, corpus_stats};
use lomt_core::mine::{greedy_match, lev_sim, levenshtein};
use lomt_core::rerank::{rerank, translate_corpus, DecodeMode, NoisyChannelWeights};
use lomt_core::search::{sample_configs, SearchSpace};
use lomt_core::subword::{learn_bpe, BpeOptions, DetokPolicy};
use lomt_core::tm::{em_train, DecoderSettings, LexModel, Translator};
use proptest::prelude::*;

fn line() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0usize..4, 1..5)
}

fn corpus() -> impl Strategy<Value = Vec<(Vec<usize>, Vec<usize>)>> {
    proptest::collection::vec((line(), line()), 2..8)
}

fn words(ids: &[usize], prefix: &str) -> Sentence {
    Sentence::new(ids.iter().map(|i| format!("{prefix}{i}")).collect())
}

fn train(raw: &[(Vec<usize>, Vec<usize>)], direction: Direction, window: usize) -> LexModel {
    let pairs: Vec<Pair> = raw
        .iter()
        .map(|(s, t)| match direction {
            Direction::Forward => Pair::new(words(s, "s"), words(t, "t")),
            Direction::Backward => Pair::new(words(t, "t"), words(s, "s")),
        })
        .collect();
    let targets: Vec<Sentence> = pairs.iter().map(|p| p.target.clone()).collect();
    let lm = Arc::new(NGramLM::train(&targets, 2, 0.1).unwrap());
    let ds = TaggedDataset::parallel("bitext", Tag::new("<d:in>").unwrap(), pairs).unwrap();
    let mix = DataMix::build_directed(vec![ds], direction).unwrap();
    let settings = DecoderSettings { beam: 6, window, lm_weight: 0.5, max_options: None, length_norm: false };
    em_train(&mix, 4, lm, settings).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn translation_rows_are_distributions(raw in corpus()) {
        let m = train(&raw, Direction::Forward, 1);
        let mut rows: BTreeMap<&str, f64> = BTreeMap::new();
        for (s, _, p) in m.entries() {
            prop_assert!((0.0..=1.0).contains(&p));
            *rows.entry(s).or_default() += p;
        }
        for (s, total) in rows {
            prop_assert!((total - 1.0).abs() < 1e-9, "row {} sums to {}", s, total);
        }
    }

    #[test]
    fn nbest_lists_are_sorted_distinct_and_bounded(raw in corpus(), x in line(), n in 1usize..12, window in 0usize..3) {
        let m = train(&raw, Direction::Forward, window);
        let list = m.nbest(&words(&x, "s"), n).unwrap();
        prop_assert!(!list.is_empty() && list.len() <= n);
        prop_assert!(list.entries.windows(2).all(|w| w[0].fwd >= w[1].fwd));
        let distinct: BTreeSet<String> = list.entries.iter().map(|e| e.hypothesis.to_string()).collect();
        prop_assert_eq!(distinct.len(), list.len());
        prop_assert!(list.entries.iter().all(|e| e.fwd.is_finite()));
    }

    #[test]
    fn reranking_permutes_the_list(raw in corpus(), x in line(), l1 in 0.0f64..3.0, l2 in 0.0f64..3.0) {
        let f = train(&raw, Direction::Forward, 1);
        let g = train(&raw, Direction::Backward, 1);
        let list = f.nbest(&words(&x, "s"), 6).unwrap();
        let mut before: Vec<String> = list.entries.iter().map(|e| e.hypothesis.to_string()).collect();
        let out = rerank(list, &g, f.lm(), NoisyChannelWeights::new(l1, l2).unwrap()).unwrap();
        let mut after: Vec<String> = out.entries.iter().map(|e| e.hypothesis.to_string()).collect();
        let combined: Vec<f64> = out.entries.iter().map(|e| e.combined.unwrap()).collect();
        prop_assert!(combined.windows(2).all(|w| w[0] >= w[1]));
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn corpus_translation_follows_input_order(raw in corpus(), xs in proptest::collection::vec(line(), 1..6)) {
        let m = train(&raw, Direction::Forward, 1);
        let sources: Vec<Sentence> = xs.iter().map(|x| words(x, "s")).collect();
        let all = translate_corpus(&m, &sources, &DecodeMode::Beam).unwrap();
        for (x, y) in sources.iter().zip(&all) {
            prop_assert_eq!(&m.nbest(x, 1).unwrap().entries[0].hypothesis, y);
        }
    }

    #[test]
    fn duplicated_members_do_not_change_the_ensemble(raw in corpus(), copies in 1usize..4) {
        let m = train(&raw, Direction::Forward, 1);
        let ens = Ensemble::new(vec![m.clone(); copies]).unwrap();
        for (s, t, p) in m.entries() {
            prop_assert!((ens.prob(s, t) - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn bleu_is_bounded(pairs in proptest::collection::vec((line(), line()), 1..10)) {
        let hyps: Vec<Sentence> = pairs.iter().map(|p| words(&p.0, "w")).collect();
        let refs: Vec<Sentence> = pairs.iter().map(|p| words(&p.1, "w")).collect();
        let b = bleu(&hyps, &refs).unwrap();
        prop_assert!((0.0..=100.0).contains(&b));
        let stats = corpus_stats(&hyps, &refs).unwrap();
        for (m, t) in stats.matches.iter().zip(&stats.totals) {
            prop_assert!(m <= t);
        }
    }

    #[test]
    fn greedy_matching_is_one_to_one_and_maximal(
        sims in proptest::collection::vec(proptest::collection::vec(0u8..5, 4), 1..6),
        threshold in 0u8..4,
    ) {
        let sims: Vec<Vec<f64>> = sims.iter().map(|r| r.iter().map(|&v| f64::from(v) / 4.0).collect()).collect();
        let t = f64::from(threshold) / 4.0;
        let m = greedy_match(&sims, t).unwrap();
        let rows: BTreeSet<usize> = m.iter().map(|p| p.0).collect();
        let cols: BTreeSet<usize> = m.iter().map(|p| p.1).collect();
        prop_assert_eq!(rows.len(), m.len());
        prop_assert_eq!(cols.len(), m.len());
        prop_assert!(m.iter().all(|&(i, j)| sims[i][j] >= t));
        prop_assert!(m.windows(2).all(|w| sims[w[0].0][w[0].1] >= sims[w[1].0][w[1].1]));
        for (i, row) in sims.iter().enumerate() {
            for (j, &s) in row.iter().enumerate() {
                prop_assert!(s < t || rows.contains(&i) || cols.contains(&j));
            }
        }
    }

    #[test]
    fn sampled_configs_stay_inside_the_space(n in 1usize..20, seed in any::<u64>()) {
        let space = SearchSpace::default();
        for c in sample_configs(&space, n, seed).unwrap() {
            prop_assert!(space.em_iterations.contains(&c.em_iterations));
            prop_assert!(space.lm_order.contains(&c.lm_order));
            prop_assert!(space.lm_weight.contains(&c.lm_weight));
            prop_assert!(space.window.contains(&c.window));
            prop_assert!(space.beam.contains(&c.beam));
            prop_assert!(space.bitext_upsample.contains(&c.upsamples.bitext));
            prop_assert!(space.st_upsample.contains(&c.upsamples.st));
            prop_assert!(space.bt_upsample.contains(&c.upsamples.bt));
            prop_assert!(space.seed.contains(&c.seed));
        }
        prop_assert_eq!(sample_configs(&space, n, seed).unwrap(), sample_configs(&space, n, seed).unwrap());
    }

    #[test]
    fn bpe_round_trips_tagged_text(lines in proptest::collection::vec("[a-f]{1,6}( [a-f]{1,6}){0,5}", 1..6), vocab in 8usize..60) {
        let corpus: Vec<Sentence> = lines.iter().map(|l| Sentence::parse(l)).collect();
        let model = learn_bpe(&corpus, vocab, &BpeOptions::default()).unwrap();
        for l in &lines {
            let tagged = Sentence::parse(&format!("<d:in> {l}"));
            let enc = model.encode(&tagged);
            prop_assert_eq!(&enc.tokens()[0], "<d:in>");
            prop_assert_eq!(model.decode(&enc, DetokPolicy::SpaceJoined), tagged.to_string());
        }
    }

    #[test]
    fn edit_distance_matches_reference(a in "[a-dé/.]{0,12}", b in "[a-dé/.]{0,12}") {
        prop_assert_eq!(levenshtein(&a, &b), strsim::levenshtein(&a, &b));
        let expected = if a.is_empty() && b.is_empty() { 1.0 } else { strsim::normalized_levenshtein(&a, &b) };
        prop_assert!((lev_sim(&a, &b) - expected).abs() < 1e-12);
    }
}
