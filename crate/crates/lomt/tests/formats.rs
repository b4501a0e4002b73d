use std::sync::Arc;

use lomt::io::{self, bpe, datasets, lm, model, nbest};
use lomt::Error;
use lomt_core::corpus::DataMix;
use lomt_core::ensemble::EnsembleLm;
use lomt_core::subword::{learn_bpe, BpeOptions};
use lomt_core::synth::{gen_corpora, SynthSizes, SynthSpec};
use lomt_core::tm::em_train;
use lomt_core::{DecoderSettings, Ensemble, LexModel, NGramLM, Sentence, Translator};

fn small_spec() -> SynthSpec {
    SynthSpec {
        vocab_size: 40,
        sizes: SynthSizes { parallel: 80, mono_src: 30, mono_tgt: 30, dev: 15, test: 15 },
        ..SynthSpec::default()
    }
}

fn trained(seed: u64, lm_order: usize) -> (LexModel, Vec<Sentence>) {
    let b = gen_corpora(&SynthSpec { seed, ..small_spec() }).unwrap();
    let lm = Arc::new(NGramLM::train(&b.parallel.target_side(), lm_order, 0.05).unwrap());
    let mix = DataMix::build(vec![b.parallel.apply_tag()]).unwrap();
    let m = em_train(&mix, 5, lm, DecoderSettings::default()).unwrap();
    let sources = b.dev.iter().map(|p| p.source.clone()).collect();
    (m, sources)
}

fn assert_same_nbest(a: &dyn Translator, b: &dyn Translator, xs: &[Sentence]) {
    for x in xs {
        let (p, q) = (a.nbest(x, 5).unwrap(), b.nbest(x, 5).unwrap());
        assert_eq!(p.len(), q.len());
        for (e, f) in p.entries.iter().zip(&q.entries) {
            assert_eq!(e.hypothesis, f.hypothesis);
            assert_eq!(e.fwd.to_bits(), f.fwd.to_bits());
        }
    }
}

#[test]
fn lm_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (m, xs) = trained(3, 3);
    let adapted = m.lm().finetune(&xs, 0.4).unwrap();
    for original in [m.lm(), &adapted] {
        let path = dir.path().join("x.lm");
        let h = lm::save(&path, original).unwrap();
        let loaded = lm::load(&path).unwrap();
        assert_eq!(lm::hash(&loaded), h);
        for x in &xs {
            assert_eq!(original.logprob(x).to_bits(), loaded.logprob(x).to_bits());
        }
    }
}

#[test]
fn model_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (m, xs) = trained(4, 2);
    let path = dir.path().join("m.model");
    let h = model::save(&path, &m).unwrap();
    assert_eq!(h, model::hash(&m));
    let loaded = model::load_verified(&path, &h).unwrap();
    assert_eq!(model::hash(&loaded), h);
    assert_eq!(loaded.settings(), m.settings());
    assert_same_nbest(&m, &loaded, &xs);
}

#[test]
fn ensemble_round_trip_keeps_member_order() {
    let dir = tempfile::tempdir().unwrap();
    let members = vec![trained(5, 2).0, trained(6, 3).0];
    let ens = Ensemble::with_lm(members.clone(), EnsembleLm::Average).unwrap();
    let path = dir.path().join("e.ens");
    let (h, hashes) = model::save_ensemble(&path, &dir.path().join("models"), &ens).unwrap();
    assert_eq!(hashes, members.iter().map(model::hash).collect::<Vec<_>>());
    let loaded = model::load_ensemble_verified(&path, &h).unwrap();
    assert_eq!(loaded.lm_mode(), EnsembleLm::Average);
    let xs = trained(5, 2).1;
    assert_same_nbest(&ens, &loaded, &xs);
    let any = model::load_translator(&path).unwrap();
    assert_same_nbest(&ens, any.as_ref(), &xs);
}

#[test]
fn tampered_model_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = trained(7, 2);
    let path = dir.path().join("m.model");
    let h = model::save(&path, &m).unwrap();
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push('\n');
    std::fs::write(&path, text).unwrap();
    let err = model::load_verified(&path, &h).unwrap_err();
    assert!(matches!(err, Error::HashMismatch { .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn bpe_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus: Vec<Sentence> =
        ["low lower lowest", "newer newest <d:in>", "wide wider widest"].iter().map(|l| Sentence::parse(l)).collect();
    let mut opts = BpeOptions::default();
    opts.reserved.insert("<d:in>".into());
    let m = learn_bpe(&corpus, 30, &opts).unwrap();
    let path = dir.path().join("codes.bpe");
    bpe::save(&path, &m).unwrap();
    let loaded = bpe::load(&path).unwrap();
    assert_eq!(loaded.merges(), m.merges());
    assert_eq!(bpe::format(&loaded), bpe::format(&m));
    for s in &corpus {
        assert_eq!(loaded.encode(s), m.encode(s));
    }
}

#[test]
fn nbest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (m, xs) = trained(8, 2);
    let lists: Vec<_> = xs.iter().take(4).map(|x| m.nbest(x, 3).unwrap()).collect();
    let path = dir.path().join("out.nbest");
    nbest::save(&path, &lists).unwrap();
    assert_eq!(nbest::load(&path, &xs[..4]).unwrap(), lists);
}

#[test]
fn nbest_errors_name_the_line() {
    let path = std::path::Path::new("bad.nbest");
    let text = "lomt-nbest v1\n0\t0\ta b\t-1.5\t-\t-\t-\n0\t2\tc\t-2\t-\t-\t-\n";
    match nbest::parse(path, text, &[Sentence::parse("x")]) {
        Err(Error::Format { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn dataset_manifest_groups_by_role() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("par.tsv"), "a b\tx y\nc\tz\n").unwrap();
    std::fs::write(d.join("bt.tsv"), "a\tx\n").unwrap();
    std::fs::write(d.join("mono.tgt"), "x y z\n\nz\n").unwrap();
    std::fs::write(d.join("dev.tsv"), "a\tx\n").unwrap();
    let manifest = r#"
version = 1
dev = "dev.tsv"

[[dataset]]
name = "bitext"
path = "par.tsv"
side = "parallel"
tag = "<d:in>"
upsample = 2

[[dataset]]
name = "old-bt"
path = "bt.tsv"
side = "parallel"
tag = "<bt>"

[[dataset]]
name = "mono"
path = "mono.tgt"
side = "mono-target"
tag = "<d:out>"
"#;
    std::fs::write(d.join("datasets.toml"), manifest).unwrap();
    let ds = datasets::load(&d.join("datasets.toml")).unwrap();
    let bitext = ds.bitext().unwrap();
    assert_eq!((bitext.len(), bitext.upsample()), (2, 2));
    assert_eq!(ds.bt.as_ref().unwrap().len(), 1);
    assert_eq!(ds.mono_target.as_ref().unwrap().len(), 2);
    assert!(ds.st.is_none() && ds.mono_source.is_none() && ds.test.is_none());
    assert_eq!(ds.dev().unwrap().len(), 1);

    std::fs::write(d.join("par.tsv"), "a b\tx y\tz\n").unwrap();
    let err = datasets::load(&d.join("datasets.toml")).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn sha256_matches_known_digest() {
    assert_eq!(io::sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
